//! Minimum spanning trees over distance matrices, tree comparison across
//! periods, class clustering, and DOT/JSON export.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::correlation::DistanceMatrix;
use crate::error::{Error, Result};
use crate::timeseries::{AssetClass, AssetMeta};

/// Undirected edge; endpoints are stored with `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub a: String,
    pub b: String,
    pub distance: f64,
}

impl TreeEdge {
    pub fn new(x: impl Into<String>, y: impl Into<String>, distance: f64) -> Self {
        let (x, y) = (x.into(), y.into());
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        TreeEdge { a, b, distance }
    }

    fn key(&self) -> (&str, &str) {
        (&self.a, &self.b)
    }
}

/// Strict total order used by Kruskal: weight, then endpoint names.
fn edge_order(x: &TreeEdge, y: &TreeEdge) -> Ordering {
    x.distance
        .total_cmp(&y.distance)
        .then_with(|| x.key().cmp(&y.key()))
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, x: usize, y: usize) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        match self.rank[rx].cmp(&self.rank[ry]) {
            Ordering::Less => self.parent[rx] = ry,
            Ordering::Greater => self.parent[ry] = rx,
            Ordering::Equal => {
                self.parent[ry] = rx;
                self.rank[rx] += 1;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningTree {
    symbols: Vec<String>,
    edges: Vec<TreeEdge>,
}

impl SpanningTree {
    /// Validates that `edges` form a spanning tree over `symbols`.
    pub fn new(symbols: Vec<String>, edges: Vec<TreeEdge>) -> Result<Self> {
        let n = symbols.len();
        if n < 2 {
            return Err(Error::MatrixTooSmall(n));
        }
        if edges.len() != n - 1 {
            return Err(Error::InvalidTree(format!(
                "{} edges for {n} symbols",
                edges.len()
            )));
        }
        let index: HashMap<&str, usize> = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        if index.len() != n {
            return Err(Error::InvalidTree("duplicate symbol".into()));
        }
        let mut sets = DisjointSets::new(n);
        let mut normalized = Vec::with_capacity(edges.len());
        for e in edges {
            let lookup = |s: &str| {
                index.get(s).copied().ok_or_else(|| {
                    Error::InvalidTree(format!("edge endpoint {s} is not a tree symbol"))
                })
            };
            let (i, j) = (lookup(&e.a)?, lookup(&e.b)?);
            if !(0.0..=SQRT_2).contains(&e.distance) {
                return Err(Error::InvalidTree(format!(
                    "edge ({}, {}) distance {} outside [0, sqrt 2]",
                    e.a, e.b, e.distance
                )));
            }
            if !sets.union(i, j) {
                return Err(Error::InvalidTree(format!(
                    "edge ({}, {}) closes a cycle",
                    e.a, e.b
                )));
            }
            normalized.push(TreeEdge::new(e.a, e.b, e.distance));
        }
        Ok(SpanningTree {
            symbols,
            edges: normalized,
        })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Edges in the order they were accepted (ascending weight for built trees).
    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    /// Sum of edge distances, accumulated in ascending weight order so that
    /// trees with equal weight multisets give bit-identical totals.
    pub fn total_weight(&self) -> f64 {
        let mut weights: Vec<f64> = self.edges.iter().map(|e| e.distance).collect();
        weights.sort_by(f64::total_cmp);
        weights.iter().sum()
    }

    pub fn edge_set(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|e| (e.a.clone(), e.b.clone()))
            .collect()
    }

    /// Number of incident edges per symbol.
    pub fn degrees(&self) -> BTreeMap<String, usize> {
        let mut degrees: BTreeMap<String, usize> =
            self.symbols.iter().map(|s| (s.clone(), 0)).collect();
        for e in &self.edges {
            *degrees
                .get_mut(&e.a)
                .expect("edge endpoints are tree symbols") += 1;
            *degrees
                .get_mut(&e.b)
                .expect("edge endpoints are tree symbols") += 1;
        }
        degrees
    }
}

/// Kruskal's algorithm with ties broken by endpoint names, so equal
/// distances never make the tree depend on symbol order.
pub fn build_mst(d: &DistanceMatrix) -> Result<SpanningTree> {
    let n = d.n();
    if n < 2 {
        return Err(Error::MatrixTooSmall(n));
    }
    let symbols = d.symbols();
    let mut candidates: Vec<(TreeEdge, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let edge = TreeEdge::new(symbols[i].clone(), symbols[j].clone(), d.get(i, j));
            candidates.push((edge, i, j));
        }
    }
    candidates.sort_by(|x, y| edge_order(&x.0, &y.0));

    let mut sets = DisjointSets::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for (edge, i, j) in candidates {
        if sets.union(i, j) {
            edges.push(edge);
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    Ok(SpanningTree {
        symbols: symbols.to_vec(),
        edges,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub labels: (String, String),
    pub shared_edges: usize,
    pub overlap_fraction: f64,
}

/// Fraction of edges two trees over the same symbols have in common.
pub fn edge_overlap(
    a: &SpanningTree,
    b: &SpanningTree,
    labels: (impl Into<String>, impl Into<String>),
) -> Result<StabilityReport> {
    let set_a: BTreeSet<&String> = a.symbols.iter().collect();
    let set_b: BTreeSet<&String> = b.symbols.iter().collect();
    if set_a != set_b {
        return Err(Error::SymbolSetMismatch);
    }
    let edges_b = b.edge_set();
    let shared_edges = a
        .edges
        .iter()
        .filter(|e| edges_b.contains(&(e.a.clone(), e.b.clone())))
        .count();
    Ok(StabilityReport {
        labels: (labels.0.into(), labels.1.into()),
        shared_edges,
        overlap_fraction: shared_edges as f64 / a.edges.len() as f64,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassEdges {
    /// Edges with both endpoints in the class.
    pub intra: usize,
    /// Edges with exactly one endpoint in the class.
    pub cross: usize,
    /// `intra / (intra + cross)`, 0 when the class touches no edge.
    pub intra_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub per_class: BTreeMap<AssetClass, ClassEdges>,
    pub intra_edges: usize,
    pub cross_edges: usize,
    /// Share of all tree edges that join two assets of the same class.
    pub intra_fraction: f64,
}

pub fn class_clustering(t: &SpanningTree, meta: &[AssetMeta]) -> Result<ClusteringReport> {
    let classes: HashMap<&str, AssetClass> =
        meta.iter().map(|m| (m.symbol.as_str(), m.class)).collect();
    let class_of = |s: &str| {
        classes
            .get(s)
            .copied()
            .ok_or_else(|| Error::UnknownSymbol(s.to_string()))
    };
    let mut per_class: BTreeMap<AssetClass, ClassEdges> = BTreeMap::new();
    for s in &t.symbols {
        per_class.entry(class_of(s)?).or_default();
    }
    let (mut intra_edges, mut cross_edges) = (0, 0);
    for e in &t.edges {
        let (ca, cb) = (class_of(&e.a)?, class_of(&e.b)?);
        if ca == cb {
            intra_edges += 1;
            per_class.entry(ca).or_default().intra += 1;
        } else {
            cross_edges += 1;
            per_class.entry(ca).or_default().cross += 1;
            per_class.entry(cb).or_default().cross += 1;
        }
    }
    for stats in per_class.values_mut() {
        let touching = stats.intra + stats.cross;
        stats.intra_fraction = if touching == 0 {
            0.0
        } else {
            stats.intra as f64 / touching as f64
        };
    }
    Ok(ClusteringReport {
        per_class,
        intra_edges,
        cross_edges,
        intra_fraction: intra_edges as f64 / t.edges.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeFormat {
    Dot,
    Json,
}

/// Node colours: commodities red, currencies green, stock indicators blue.
pub fn class_color(class: AssetClass) -> &'static str {
    match class {
        AssetClass::CommodityFuture => "red",
        AssetClass::CurrencyFuture => "green",
        AssetClass::StockIndex => "blue",
    }
}

#[derive(Serialize, Deserialize)]
struct JsonNode {
    symbol: String,
    class: AssetClass,
}

#[derive(Serialize, Deserialize)]
struct JsonTree {
    nodes: Vec<JsonNode>,
    edges: Vec<TreeEdge>,
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn export_tree(t: &SpanningTree, meta: &[AssetMeta], format: TreeFormat) -> Result<Vec<u8>> {
    let classes: HashMap<&str, AssetClass> =
        meta.iter().map(|m| (m.symbol.as_str(), m.class)).collect();
    let class_of = |s: &str| {
        classes
            .get(s)
            .copied()
            .ok_or_else(|| Error::UnknownSymbol(s.to_string()))
    };
    match format {
        TreeFormat::Dot => {
            let mut out = String::from("graph mst {\n  node [style=filled];\n");
            for s in &t.symbols {
                let _ = writeln!(
                    out,
                    "  {} [fillcolor={}];",
                    dot_id(s),
                    class_color(class_of(s)?)
                );
            }
            for e in &t.edges {
                let _ = writeln!(
                    out,
                    "  {} -- {} [label=\"{:.4}\"];",
                    dot_id(&e.a),
                    dot_id(&e.b),
                    e.distance
                );
            }
            out.push_str("}\n");
            Ok(out.into_bytes())
        }
        TreeFormat::Json => {
            let nodes = t
                .symbols
                .iter()
                .map(|s| {
                    Ok(JsonNode {
                        symbol: s.clone(),
                        class: class_of(s)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let doc = JsonTree {
                nodes,
                edges: t.edges.clone(),
            };
            let mut bytes = serde_json::to_vec_pretty(&doc).expect("tree serializes");
            bytes.push(b'\n');
            Ok(bytes)
        }
    }
}

/// Reads a tree written by [`export_tree`] in JSON form.
pub fn import_tree_json(bytes: &[u8]) -> Result<(SpanningTree, Vec<AssetMeta>)> {
    let doc: JsonTree = serde_json::from_slice(bytes).map_err(|e| Error::MalformedInput {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    let meta = doc
        .nodes
        .iter()
        .map(|n| AssetMeta::new(n.symbol.clone(), n.class))
        .collect();
    let tree = SpanningTree::new(doc.nodes.into_iter().map(|n| n.symbol).collect(), doc.edges)?;
    Ok((tree, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("A{i}")).collect()
    }

    fn matrix(symbols: Vec<String>, upper: impl Fn(usize, usize) -> f64) -> DistanceMatrix {
        let n = symbols.len();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                v[i * n + j] = upper(i, j);
                v[j * n + i] = upper(i, j);
            }
        }
        DistanceMatrix::new(symbols, v).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DistanceMatrix {
        let n2 = n;
        let draws: Vec<f64> = (0..n2 * n2).map(|_| rng.random::<f64>() * SQRT_2).collect();
        matrix(names(n), |i, j| draws[i * n2 + j])
    }

    /// Enumerates all labelled trees through Prüfer sequences.
    fn brute_force(d: &DistanceMatrix) -> (f64, BTreeSet<(String, String)>) {
        let n = d.n();
        if n == 2 {
            let t = SpanningTree::new(
                d.symbols().to_vec(),
                vec![TreeEdge::new(&d.symbols()[0], &d.symbols()[1], d.get(0, 1))],
            )
            .unwrap();
            return (t.total_weight(), t.edge_set());
        }
        let mut seq = vec![0usize; n - 2];
        let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
        loop {
            let mut degree = vec![1usize; n];
            for &s in &seq {
                degree[s] += 1;
            }
            let mut pairs = Vec::with_capacity(n - 1);
            for &s in &seq {
                let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
                pairs.push((leaf, s));
                degree[leaf] -= 1;
                degree[s] -= 1;
            }
            let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
            pairs.push((rest[0], rest[1]));
            let mut w: Vec<f64> = pairs.iter().map(|&(a, b)| d.get(a, b)).collect();
            w.sort_by(f64::total_cmp);
            let total: f64 = w.iter().sum();
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                best = Some((total, pairs));
            }
            // next sequence in base n
            let mut k = 0;
            while k < seq.len() && seq[k] == n - 1 {
                seq[k] = 0;
                k += 1;
            }
            if k == seq.len() {
                break;
            }
            seq[k] += 1;
        }
        let (total, pairs) = best.unwrap();
        let set = pairs
            .into_iter()
            .map(|(a, b)| {
                let e = TreeEdge::new(&d.symbols()[a], &d.symbols()[b], 0.0);
                (e.a, e.b)
            })
            .collect();
        (total, set)
    }

    #[test]
    fn two_assets_give_one_edge() {
        let t = build_mst(&matrix(names(2), |_, _| 0.7)).unwrap();
        assert_eq!(t.edges(), &[TreeEdge::new("A0", "A1", 0.7)]);
    }

    #[test]
    fn three_asset_example() {
        let symbols: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let d = matrix(symbols, |i, j| match (i, j) {
            (0, 1) => 0.5,
            (0, 2) => 0.7,
            _ => 0.9,
        });
        let t = build_mst(&d).unwrap();
        let expected: BTreeSet<(String, String)> = [("A", "B"), ("A", "C")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(t.edge_set(), expected);
        assert!((t.total_weight() - 1.2).abs() < 1e-15);
        assert_eq!(brute_force(&d).1, expected);
    }

    #[test]
    fn rejects_single_asset() {
        let d = DistanceMatrix::new(vec!["A".into()], vec![0.0]).unwrap();
        assert_eq!(build_mst(&d), Err(Error::MatrixTooSmall(1)));
    }

    #[test]
    fn matches_brute_force_on_random_eight_asset_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..3 {
            let d = random_matrix(&mut rng, 8);
            let t = build_mst(&d).unwrap();
            let (total, set) = brute_force(&d);
            assert_eq!(t.total_weight(), total);
            assert_eq!(t.edge_set(), set);
        }
    }

    #[test]
    fn ties_break_on_symbol_names() {
        // all distances equal: Kruskal takes (A,B), (A,C), (A,D)
        let symbols: Vec<String> = ["D", "C", "B", "A"].iter().map(|s| s.to_string()).collect();
        let t = build_mst(&matrix(symbols, |_, _| 1.0)).unwrap();
        let got: Vec<(String, String)> = t
            .edges()
            .iter()
            .map(|e| (e.a.clone(), e.b.clone()))
            .collect();
        assert_eq!(
            got,
            vec![
                ("A".into(), "B".into()),
                ("A".into(), "C".into()),
                ("A".into(), "D".into())
            ]
        );
    }

    #[test]
    fn zero_distance_pairs_are_taken_first() {
        let t = build_mst(&matrix(
            names(3),
            |i, j| if (i, j) == (1, 2) { 0.0 } else { 1.0 },
        ))
        .unwrap();
        assert_eq!(t.edges()[0], TreeEdge::new("A1", "A2", 0.0));
    }

    fn path(symbols: &[&str]) -> SpanningTree {
        SpanningTree::new(
            symbols.iter().map(|s| s.to_string()).collect(),
            symbols
                .windows(2)
                .map(|w| TreeEdge::new(w[0], w[1], 0.5))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn overlap_examples() {
        let a = path(&["A", "B", "C", "D", "E"]);
        assert_eq!(
            edge_overlap(&a, &a, ("x", "x")).unwrap().overlap_fraction,
            1.0
        );
        // A-B, B-C, D-E shared; C-D replaced by C-E
        let b = path(&["A", "B", "C", "E", "D"]);
        let half = SpanningTree::new(
            a.symbols().to_vec(),
            vec![
                TreeEdge::new("A", "B", 0.1),
                TreeEdge::new("B", "C", 0.1),
                TreeEdge::new("C", "E", 0.1),
                TreeEdge::new("B", "D", 0.1),
            ],
        )
        .unwrap();
        let r = edge_overlap(&a, &half, ("2007", "2008")).unwrap();
        assert_eq!((r.shared_edges, r.overlap_fraction), (2, 0.5));
        assert_eq!(r.labels, ("2007".to_string(), "2008".to_string()));
        assert_eq!(edge_overlap(&a, &b, ("x", "y")).unwrap().shared_edges, 3);
        let star = SpanningTree::new(
            a.symbols().to_vec(),
            ["B", "C", "D", "E"]
                .iter()
                .map(|s| TreeEdge::new("A", *s, 0.1))
                .collect(),
        )
        .unwrap();
        let other = SpanningTree::new(
            a.symbols().to_vec(),
            vec![
                TreeEdge::new("A", "C", 0.1),
                TreeEdge::new("C", "E", 0.1),
                TreeEdge::new("E", "B", 0.1),
                TreeEdge::new("B", "D", 0.1),
            ],
        )
        .unwrap();
        assert_eq!(
            edge_overlap(&star, &other, ("x", "y"))
                .unwrap()
                .shared_edges,
            1
        );
        let disjoint = SpanningTree::new(
            a.symbols().to_vec(),
            vec![
                TreeEdge::new("A", "C", 0.1),
                TreeEdge::new("C", "E", 0.1),
                TreeEdge::new("E", "B", 0.1),
                TreeEdge::new("B", "D", 0.1),
            ],
        )
        .unwrap();
        assert_eq!(
            edge_overlap(&a, &disjoint, ("x", "y"))
                .unwrap()
                .overlap_fraction,
            0.0
        );
        assert_eq!(
            edge_overlap(&a, &path(&["A", "B", "C", "D", "F"]), ("x", "y")),
            Err(Error::SymbolSetMismatch)
        );
    }

    #[test]
    fn tree_validation() {
        let symbols: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        assert!(SpanningTree::new(symbols.clone(), vec![TreeEdge::new("A", "B", 0.1)]).is_err());
        assert!(SpanningTree::new(
            symbols.clone(),
            vec![TreeEdge::new("A", "B", 0.1), TreeEdge::new("B", "A", 0.1)]
        )
        .is_err());
        assert!(SpanningTree::new(
            symbols.clone(),
            vec![TreeEdge::new("A", "B", 0.1), TreeEdge::new("B", "Z", 0.1)]
        )
        .is_err());
        assert!(SpanningTree::new(
            symbols,
            vec![TreeEdge::new("A", "B", 0.1), TreeEdge::new("B", "C", 2.0)]
        )
        .is_err());
    }

    fn meta_of(pairs: &[(&str, AssetClass)]) -> Vec<AssetMeta> {
        pairs.iter().map(|(s, c)| AssetMeta::new(*s, *c)).collect()
    }

    #[test]
    fn clustering_examples() {
        use AssetClass::*;
        let t = path(&["A", "B", "C"]);
        let same = class_clustering(
            &t,
            &meta_of(&[("A", StockIndex), ("B", StockIndex), ("C", StockIndex)]),
        )
        .unwrap();
        assert_eq!(same.intra_fraction, 1.0);
        assert_eq!(same.per_class[&StockIndex].intra, 2);

        let star = SpanningTree::new(
            ["H", "L1", "L2", "L3"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            ["L1", "L2", "L3"]
                .iter()
                .map(|s| TreeEdge::new("H", *s, 0.3))
                .collect(),
        )
        .unwrap();
        let meta = meta_of(&[
            ("H", CurrencyFuture),
            ("L1", CommodityFuture),
            ("L2", CommodityFuture),
            ("L3", CommodityFuture),
        ]);
        let r = class_clustering(&star, &meta).unwrap();
        assert_eq!(
            (r.intra_edges, r.cross_edges, r.intra_fraction),
            (0, 3, 0.0)
        );
        assert_eq!(r.per_class[&CurrencyFuture].cross, 3);
        assert_eq!(r.per_class[&CommodityFuture].cross, 3);
        assert_eq!(r.intra_edges + r.cross_edges, 3);

        assert_eq!(
            class_clustering(&star, &meta[..3]),
            Err(Error::UnknownSymbol("L3".into()))
        );
    }

    #[test]
    fn dot_export_two_nodes() {
        let t = SpanningTree::new(
            vec!["EUA".into(), "DJIA".into()],
            vec![TreeEdge::new("EUA", "DJIA", 0.123456)],
        )
        .unwrap();
        let meta = meta_of(&[
            ("EUA", AssetClass::CommodityFuture),
            ("DJIA", AssetClass::StockIndex),
        ]);
        let dot = String::from_utf8(export_tree(&t, &meta, TreeFormat::Dot).unwrap()).unwrap();
        assert_eq!(
            dot,
            "graph mst {\n  node [style=filled];\n  \"EUA\" [fillcolor=red];\n  \"DJIA\" [fillcolor=blue];\n  \"DJIA\" -- \"EUA\" [label=\"0.1235\"];\n}\n"
        );
    }

    #[test]
    fn json_round_trip_and_edge_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(69);
        let d = random_matrix(&mut rng, 69);
        let t = build_mst(&d).unwrap();
        let meta: Vec<AssetMeta> = d
            .symbols()
            .iter()
            .enumerate()
            .map(|(i, s)| AssetMeta::new(s.clone(), AssetClass::ALL[i % 3]))
            .collect();
        let json = export_tree(&t, &meta, TreeFormat::Json).unwrap();
        let (back, back_meta) = import_tree_json(&json).unwrap();
        assert_eq!(back, t);
        assert_eq!(back_meta, meta);
        assert_eq!(back.edges().len(), 68);
        let dot = String::from_utf8(export_tree(&t, &meta, TreeFormat::Dot).unwrap()).unwrap();
        assert_eq!(dot.matches(" -- ").count(), 68);
    }

    proptest! {
        #[test]
        fn monotone_transform_and_relabelling_keep_edges(seed in any::<u64>(), n in 3usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
            let linear = matrix(names(n), |i, j| 1.0 - rho[i * n + j]);
            let metric = matrix(names(n), |i, j| (2.0 * (1.0 - rho[i * n + j])).sqrt());
            let a = build_mst(&linear).unwrap();
            let b = build_mst(&metric).unwrap();
            prop_assert_eq!(a.edge_set(), b.edge_set());

            // reverse the symbol order: same labelled edges
            let perm: Vec<usize> = (0..n).rev().collect();
            let symbols: Vec<String> = perm.iter().map(|&p| format!("A{p}")).collect();
            let permuted = matrix(symbols, |i, j| {
                let (pi, pj) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
                (2.0 * (1.0 - rho[pi * n + pj])).sqrt()
            });
            prop_assert_eq!(build_mst(&permuted).unwrap().edge_set(), b.edge_set());
        }

        #[test]
        fn tree_is_minimal_against_brute_force(seed in any::<u64>(), n in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = random_matrix(&mut rng, n);
            let t = build_mst(&d).unwrap();
            prop_assert_eq!(t.edges().len(), n - 1);
            prop_assert_eq!(t.total_weight(), brute_force(&d).0);
        }
    }
}
