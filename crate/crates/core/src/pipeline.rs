//! End-to-end runs from parsed prices to the report files written by the
//! command-line tool. Every run returns its files in memory so callers decide
//! where they go; contents depend only on inputs and configuration.

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{
    build_abs_corr_matrix, to_distance_matrix, verify_metric_axioms, CorrOptions, Moments,
};
use crate::error::{Error, Result};
use crate::lowess::LowessConfig;
use crate::mst::{
    build_mst, class_clustering, edge_overlap, export_tree, SpanningTree, TreeFormat,
};
use crate::timelag::{
    granger_test, lag_summary, write_curve, write_granger, write_lag_summary, write_lag_table,
    LagOptions,
};
use crate::timeseries::{
    build_panel, compute_returns, compute_volatility, AssetClass, AssetMeta, Panel, PriceSeries,
    Series, SeriesKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Inclusive bounds on observation dates.
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    /// Split `mst` and `corr` runs into calendar years instead of one full span.
    pub yearly: bool,
    pub max_lag: usize,
    pub lowess: LowessConfig,
    pub min_obs: usize,
    pub moments: Moments,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            from: None,
            to: None,
            yearly: false,
            max_lag: 150,
            lowess: LowessConfig::default(),
            min_obs: 100,
            moments: Moments::Local,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if let (Some(from), Some(to)) = (self.from, self.to) {
            if from >= to {
                return Err(Error::InvalidConfig(format!(
                    "start {from} is not before end {to}"
                )));
            }
        }
        self.lowess.validate()
    }

    pub fn corr_options(&self) -> CorrOptions {
        CorrOptions {
            min_obs: self.min_obs,
            moments: self.moments,
        }
    }

    pub fn lag_options(&self) -> LagOptions {
        LagOptions {
            max_lag: self.max_lag,
            lowess: self.lowess,
            corr: self.corr_options(),
        }
    }

    /// Windows covering the configured span of `axis`: one per calendar year
    /// with observations, or a single window labelled `full`.
    pub fn windows(&self, axis: &[NaiveDate]) -> Vec<Window> {
        let full = Window {
            label: "full".into(),
            from: self.from,
            to: self.to,
        };
        if !self.yearly {
            return vec![full];
        }
        let mut years: Vec<i32> = axis
            .iter()
            .filter(|d| self.from.is_none_or(|f| **d >= f) && self.to.is_none_or(|t| **d <= t))
            .map(|d| d.year())
            .collect();
        years.dedup();
        years
            .into_iter()
            .map(|y| {
                let start = NaiveDate::from_ymd_opt(y, 1, 1).expect("valid date");
                let end = NaiveDate::from_ymd_opt(y, 12, 31).expect("valid date");
                Window {
                    label: y.to_string(),
                    from: Some(self.from.map_or(start, |f| f.max(start))),
                    to: Some(self.to.map_or(end, |t| t.min(end))),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub label: String,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOutput {
    pub files: Vec<OutputFile>,
    /// Non-fatal findings for the user, e.g. degenerate distances.
    pub warnings: Vec<String>,
}

impl RunOutput {
    fn push(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push(OutputFile {
            name: name.into(),
            bytes,
        });
    }
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut out = Vec::new();
    write(&mut out).expect("writing to memory cannot fail");
    out
}

fn series_panel(
    series: &[Series],
    meta: &[AssetMeta],
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> Result<Panel> {
    Ok(build_panel(series, meta)?.window(from, to))
}

pub fn returns_of(prices: &[PriceSeries]) -> Vec<Series> {
    prices.iter().map(compute_returns).collect()
}

pub fn volatility_of(prices: &[PriceSeries]) -> Vec<Series> {
    prices
        .iter()
        .map(|p| compute_volatility(&compute_returns(p)))
        .collect()
}

/// Metadata is only needed for classes; plain dumps use a stand-in class.
fn placeholder_meta(prices: &[PriceSeries]) -> Vec<AssetMeta> {
    prices
        .iter()
        .map(|p| AssetMeta::new(p.symbol(), AssetClass::StockIndex))
        .collect()
}

struct WindowTree {
    window: Window,
    tree: SpanningTree,
    axioms: Vec<String>,
    clustering: Vec<Vec<String>>,
    warnings: Vec<String>,
}

fn fmt_f64(v: f64) -> String {
    v.to_string()
}

fn tree_for_window(panel: &Panel, window: &Window, opts: &CorrOptions) -> Result<WindowTree> {
    let context = format!("window {}", window.label);
    let panel = panel.window(window.from, window.to);
    let matrix = build_abs_corr_matrix(&panel, opts).map_err(|e| e.context(&context))?;
    let conversion = to_distance_matrix(&matrix);
    let tree = build_mst(&conversion.matrix).map_err(|e| e.context(&context))?;
    let report = verify_metric_axioms(&conversion.matrix);
    let axioms = vec![
        window.label.clone(),
        report.n_assets.to_string(),
        report.triples_checked.to_string(),
        report.worst_slack.map(fmt_f64).unwrap_or_default(),
        report
            .worst_triple
            .as_ref()
            .map(|(a, b, c)| format!("{a}|{b}|{c}"))
            .unwrap_or_default(),
        report.triangle_violations.len().to_string(),
        report.symmetry_violations.len().to_string(),
        report.zero_distance_pairs.len().to_string(),
        conversion.warnings.len().to_string(),
        report.passes().to_string(),
    ];
    let clusters = class_clustering(&tree, panel.meta()).map_err(|e| e.context(&context))?;
    let mut clustering: Vec<Vec<String>> = clusters
        .per_class
        .iter()
        .map(|(class, s)| {
            vec![
                window.label.clone(),
                class.to_string(),
                s.intra.to_string(),
                s.cross.to_string(),
                fmt_f64(s.intra_fraction),
            ]
        })
        .collect();
    clustering.push(vec![
        window.label.clone(),
        "all".into(),
        clusters.intra_edges.to_string(),
        clusters.cross_edges.to_string(),
        fmt_f64(clusters.intra_fraction),
    ]);
    let mut warnings: Vec<String> = conversion
        .warnings
        .iter()
        .map(|w| {
            format!(
                "{context}: {} and {} have coefficient {} and near-zero distance",
                w.a, w.b, w.rho
            )
        })
        .collect();
    for v in report.triangle_violations.iter().take(5) {
        let (a, b, c) = &v.triple;
        warnings.push(format!(
            "{context}: triangle inequality fails through {b} between {a} and {c} (slack {})",
            v.slack
        ));
    }
    Ok(WindowTree {
        window: window.clone(),
        tree,
        axioms,
        clustering,
        warnings,
    })
}

fn write_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    csv_bytes(|out| {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(header)?;
        for row in rows {
            writer.write_record(&row)?;
        }
        writer.flush()
    })
}

/// Returns, abs-correlation matrix, distance matrix and MST per window, with
/// DOT/JSON trees, axiom and clustering reports, and the edge overlap of
/// consecutive windows.
pub fn run_mst(
    prices: &[PriceSeries],
    meta: &[AssetMeta],
    config: &PipelineConfig,
) -> Result<RunOutput> {
    config.validate()?;
    let panel = series_panel(&returns_of(prices), meta, config.from, config.to)?;
    let opts = config.corr_options();
    let trees: Vec<WindowTree> = config
        .windows(panel.axis())
        .par_iter()
        .map(|w| tree_for_window(&panel, w, &opts))
        .collect::<Result<_>>()?;

    let mut out = RunOutput::default();
    for t in &trees {
        let label = &t.window.label;
        out.push(
            format!("mst_{label}.dot"),
            export_tree(&t.tree, panel.meta(), TreeFormat::Dot)?,
        );
        out.push(
            format!("mst_{label}.json"),
            export_tree(&t.tree, panel.meta(), TreeFormat::Json)?,
        );
        out.warnings.extend(t.warnings.iter().cloned());
    }
    out.push(
        "axioms.csv",
        write_rows(
            &[
                "window",
                "n_assets",
                "triples_checked",
                "worst_slack",
                "worst_triple",
                "triangle_violations",
                "symmetry_violations",
                "zero_distance_pairs",
                "degenerate_pairs",
                "passes",
            ],
            trees.iter().map(|t| t.axioms.clone()),
        ),
    );
    out.push(
        "clustering.csv",
        write_rows(
            &[
                "window",
                "class",
                "intra_edges",
                "cross_edges",
                "intra_fraction",
            ],
            trees.iter().flat_map(|t| t.clustering.clone()),
        ),
    );
    let stability = trees
        .windows(2)
        .map(|pair| {
            let r = edge_overlap(
                &pair[0].tree,
                &pair[1].tree,
                (&pair[0].window.label, &pair[1].window.label),
            )?;
            Ok(vec![
                r.labels.0,
                r.labels.1,
                r.shared_edges.to_string(),
                fmt_f64(r.overlap_fraction),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    out.push(
        "stability.csv",
        write_rows(
            &[
                "from_window",
                "to_window",
                "shared_edges",
                "overlap_fraction",
            ],
            stability,
        ),
    );
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixLayout {
    /// Square matrices with a header row and column of symbols.
    #[default]
    Wide,
    /// One `a,b,rho,distance` row per unordered pair.
    Long,
}

/// Abs-correlation and distance matrices per window.
pub fn run_corr(
    prices: &[PriceSeries],
    meta: &[AssetMeta],
    config: &PipelineConfig,
    layout: MatrixLayout,
) -> Result<RunOutput> {
    config.validate()?;
    let panel = series_panel(&returns_of(prices), meta, config.from, config.to)?;
    let opts = config.corr_options();
    let windows = config.windows(panel.axis());
    let matrices: Vec<_> = windows
        .par_iter()
        .map(|w| {
            build_abs_corr_matrix(&panel.window(w.from, w.to), &opts)
                .map_err(|e| e.context(format!("window {}", w.label)))
        })
        .collect::<Result<_>>()?;

    let mut out = RunOutput::default();
    for (w, m) in windows.iter().zip(&matrices) {
        let conversion = to_distance_matrix(m);
        match layout {
            MatrixLayout::Wide => {
                out.push(
                    format!("corr_{}.csv", w.label),
                    csv_bytes(|b| m.write_csv(b)),
                );
                out.push(
                    format!("distance_{}.csv", w.label),
                    csv_bytes(|b| conversion.matrix.write_csv(b)),
                );
            }
            MatrixLayout::Long => {
                let n = m.n();
                let rows = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .map(|(i, j)| {
                        vec![
                            m.symbols()[i].clone(),
                            m.symbols()[j].clone(),
                            format!("{:.16e}", m.get(i, j)),
                            format!("{:.16e}", conversion.matrix.get(i, j)),
                        ]
                    });
                out.push(
                    format!("corr_{}.csv", w.label),
                    write_rows(&["a", "b", "rho", "distance"], rows),
                );
            }
        }
        out.warnings.extend(conversion.warnings.iter().map(|d| {
            format!(
                "window {}: {} and {} have coefficient {} and near-zero distance",
                w.label, d.a, d.b, d.rho
            )
        }));
    }
    Ok(out)
}

/// Log returns or volatility of every series as one wide panel.
pub fn run_returns(
    prices: &[PriceSeries],
    kind: SeriesKind,
    config: &PipelineConfig,
) -> Result<RunOutput> {
    config.validate()?;
    let series = match kind {
        SeriesKind::Return => returns_of(prices),
        SeriesKind::Volatility => volatility_of(prices),
    };
    let panel = series_panel(&series, &placeholder_meta(prices), config.from, config.to)?;
    let name = match kind {
        SeriesKind::Return => "returns.csv",
        SeriesKind::Volatility => "volatility.csv",
    };
    let mut out = RunOutput::default();
    out.push(name, csv_bytes(|b| panel.write_csv(b)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LagRequest {
    pub targets: Vec<String>,
    /// Explicit reference symbols; all stock indicators when `None`.
    pub references: Option<Vec<String>>,
    /// Keep a target in its own reference set.
    pub include_self: bool,
    pub dump_curves: bool,
}

fn file_safe(symbol: &str) -> String {
    symbol
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Lag table and per-target summaries of volatility lags against a reference set.
pub fn run_lag(
    prices: &[PriceSeries],
    meta: &[AssetMeta],
    request: &LagRequest,
    config: &PipelineConfig,
) -> Result<RunOutput> {
    config.validate()?;
    if request.targets.is_empty() {
        return Err(Error::InvalidConfig("no target symbols given".into()));
    }
    let panel = series_panel(&volatility_of(prices), meta, config.from, config.to)?;
    let lookup = |symbol: &str| -> Result<Series> {
        let index = panel
            .index_of(symbol)
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_string()))?;
        panel.series(index)
    };
    let (label, mut reference_symbols) = match &request.references {
        Some(list) => ("custom".to_string(), list.clone()),
        None => (
            AssetClass::StockIndex.to_string(),
            panel
                .meta()
                .iter()
                .filter(|m| m.class == AssetClass::StockIndex)
                .map(|m| m.symbol.clone())
                .collect(),
        ),
    };
    reference_symbols.sort();
    reference_symbols.dedup();
    let references: Vec<Series> = reference_symbols
        .iter()
        .map(|s| lookup(s))
        .collect::<Result<_>>()?;
    let targets: Vec<Series> = request
        .targets
        .iter()
        .map(|s| lookup(s))
        .collect::<Result<_>>()?;

    let opts = config.lag_options();
    let summaries: Vec<_> = targets
        .iter()
        .map(|target| {
            let refs: Vec<Series> = references
                .iter()
                .filter(|r| request.include_self || r.symbol() != target.symbol())
                .cloned()
                .collect();
            lag_summary(target, &refs, label.clone(), &opts)
        })
        .collect();

    let mut out = RunOutput::default();
    out.push(
        "lag_table.csv",
        csv_bytes(|b| write_lag_table(&summaries, b)),
    );
    out.push(
        "lag_summary.csv",
        csv_bytes(|b| write_lag_summary(&summaries, b)),
    );
    for s in &summaries {
        for skipped in &s.skipped {
            out.warnings.push(format!(
                "skipped {} against {}: {}",
                s.target, skipped.reference, skipped.reason
            ));
        }
        if request.dump_curves {
            for (e, curve) in s.estimates.iter().zip(&s.curves) {
                out.push(
                    format!(
                        "curves/{}__{}.csv",
                        file_safe(&s.target),
                        file_safe(&e.pair.0)
                    ),
                    csv_bytes(|b| write_curve(curve, b)),
                );
            }
        }
    }
    Ok(out)
}

/// Granger test of whether volatility of `cause` helps forecast volatility of `effect`.
pub fn run_granger(
    prices: &[PriceSeries],
    cause: &str,
    effect: &str,
    order: usize,
    config: &PipelineConfig,
) -> Result<RunOutput> {
    config.validate()?;
    let panel = series_panel(
        &volatility_of(prices),
        &placeholder_meta(prices),
        config.from,
        config.to,
    )?;
    let lookup = |symbol: &str| -> Result<Series> {
        let index = panel
            .index_of(symbol)
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_string()))?;
        panel.series(index)
    };
    let result = granger_test(&lookup(cause)?, &lookup(effect)?, order)?;
    let mut out = RunOutput::default();
    out.push("granger.csv", csv_bytes(|b| write_granger(&[result], b)));
    Ok(out)
}
