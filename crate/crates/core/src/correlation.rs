//! Pearson and lagged cross-correlation kernels, the absolute correlation
//! coefficient, and the distance `sqrt(2 (1 - |rho|))` built on it.
//!
//! Moments are population (1/N) moments. Each pair only uses the dates on
//! which both series are observed; lags shift aligned observation indices of
//! that overlap, not calendar days.

use std::f64::consts::SQRT_2;
use std::io::Write;
use std::ops::RangeInclusive;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{Panel, Series};

/// Slack allowed on `d_ij <= d_ik + d_kj` before a triple counts as a violation.
pub const TRIANGLE_TOLERANCE: f64 = 1e-9;

/// Off-diagonal coefficients at or above this value collapse two distinct
/// assets to (almost) zero distance.
pub const DEGENERATE_RHO: f64 = 1.0 - 1e-12;

/// How each lagged coefficient is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Moments {
    /// Mean and standard deviation of the overlapping segment at each lag.
    #[default]
    Local,
    /// Mean and standard deviation of the full overlap, shared by all lags.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrOptions {
    /// Minimum number of dates on which both series are observed.
    pub min_obs: usize,
    pub moments: Moments,
}

impl Default for CorrOptions {
    fn default() -> Self {
        CorrOptions {
            min_obs: 100,
            moments: Moments::Local,
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Pearson coefficient of two equal-length slices, `None` if either is constant.
fn pearson_kernel(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    if x.len() < 2 || is_constant(x) || is_constant(y) {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation coefficient with population moments, clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            len: x.len(),
            required: 2,
        });
    }
    if is_constant(x) {
        return Err(Error::ZeroVariance("first sequence is constant".into()));
    }
    if is_constant(y) {
        return Err(Error::ZeroVariance("second sequence is constant".into()));
    }
    pearson_kernel(x, y).ok_or_else(|| Error::ZeroVariance("degenerate variance".into()))
}

/// Values of `x` and `y` on the dates where both are observed.
pub fn overlap(x: &Series, y: &Series) -> (Vec<NaiveDate>, Vec<f64>, Vec<f64>) {
    let (xd, yd) = (x.dates(), y.dates());
    let (xv, yv) = (x.values(), y.values());
    let (mut i, mut j) = (0, 0);
    let mut dates = Vec::new();
    let mut a = Vec::new();
    let mut b = Vec::new();
    while i < xd.len() && j < yd.len() {
        match xd[i].cmp(&yd[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dates.push(xd[i]);
                a.push(xv[i]);
                b.push(yv[j]);
                i += 1;
                j += 1;
            }
        }
    }
    (dates, a, b)
}

/// Segments pairing `x_t` with `y_{t+lag}` over aligned indices.
fn lagged_segments<'a>(x: &'a [f64], y: &'a [f64], lag: i64) -> (&'a [f64], &'a [f64]) {
    let m = x.len();
    let shift = (lag.unsigned_abs() as usize).min(m);
    if lag >= 0 {
        (&x[..m - shift], &y[shift..])
    } else {
        (&x[shift..], &y[..m - shift])
    }
}

/// Cross-correlation `C(n) = corr(x_t, y_{t+n})` for `n` in `[-max_lag, max_lag]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCorrelation {
    pub pair: (String, String),
    pub max_lag: usize,
    /// Number of dates where both series are observed.
    pub overlap: usize,
    /// Indexed by `lag + max_lag`; `None` where the coefficient is undefined.
    pub values: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

impl CrossCorrelation {
    /// Computes the lagged coefficients of two already aligned sequences.
    pub fn from_aligned(
        pair: (String, String),
        x: &[f64],
        y: &[f64],
        max_lag: usize,
        moments: Moments,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        let global = match moments {
            Moments::Local => None,
            Moments::Global => {
                if is_constant(x) || is_constant(y) {
                    None
                } else {
                    let (mx, my) = (mean(x), mean(y));
                    let sx =
                        (x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
                    let sy =
                        (y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
                    Some((mx, my, sx * sy))
                }
            }
        };

        let lag_bound = max_lag as i64;
        let mut values = Vec::with_capacity(2 * max_lag + 1);
        let mut counts = Vec::with_capacity(2 * max_lag + 1);
        for lag in -lag_bound..=lag_bound {
            let (xs, ys) = lagged_segments(x, y, lag);
            let count = xs.len();
            counts.push(count);
            let value = if count < 2 {
                None
            } else {
                match (moments, global) {
                    (Moments::Local, _) => pearson_kernel(xs, ys),
                    (Moments::Global, Some((mx, my, scale))) => {
                        let cov = xs
                            .iter()
                            .zip(ys)
                            .map(|(a, b)| (a - mx) * (b - my))
                            .sum::<f64>()
                            / count as f64;
                        Some((cov / scale).clamp(-1.0, 1.0))
                    }
                    (Moments::Global, None) => None,
                }
            };
            values.push(value);
        }
        Ok(CrossCorrelation {
            pair,
            max_lag,
            overlap: x.len(),
            values,
            counts,
        })
    }

    pub fn lags(&self) -> RangeInclusive<i64> {
        -(self.max_lag as i64)..=self.max_lag as i64
    }

    fn index(&self, lag: i64) -> Option<usize> {
        let idx = lag + self.max_lag as i64;
        (0..self.values.len() as i64)
            .contains(&idx)
            .then_some(idx as usize)
    }

    pub fn at(&self, lag: i64) -> Option<f64> {
        self.index(lag).and_then(|i| self.values[i])
    }

    pub fn count(&self, lag: i64) -> usize {
        self.index(lag).map_or(0, |i| self.counts[i])
    }

    /// `(lag, value)` for every lag with a defined coefficient.
    pub fn defined(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.lags()
            .zip(&self.values)
            .filter_map(|(n, v)| v.map(|v| (n, v)))
    }
}

fn check_overlap(a: &str, b: &str, overlap: usize, required: usize) -> Result<()> {
    if overlap < required.max(2) {
        return Err(Error::InsufficientOverlap {
            a: a.to_string(),
            b: b.to_string(),
            overlap,
            required: required.max(2),
        });
    }
    Ok(())
}

fn cross_correlation_aligned(
    a: &str,
    b: &str,
    x: &[f64],
    y: &[f64],
    max_lag: usize,
    opts: &CorrOptions,
) -> Result<CrossCorrelation> {
    check_overlap(a, b, x.len(), opts.min_obs)?;
    if is_constant(x) || is_constant(y) {
        let which = if is_constant(x) { a } else { b };
        return Err(Error::ZeroVariance(format!(
            "{which} is constant on the overlap of ({a}, {b})"
        )));
    }
    CrossCorrelation::from_aligned((a.to_string(), b.to_string()), x, y, max_lag, opts.moments)
}

/// Lagged cross-correlation of two dated series over their pairwise overlap.
pub fn cross_correlation(
    x: &Series,
    y: &Series,
    max_lag: usize,
    opts: &CorrOptions,
) -> Result<CrossCorrelation> {
    let (_, a, b) = overlap(x, y);
    cross_correlation_aligned(x.symbol(), y.symbol(), &a, &b, max_lag, opts)
}

fn abs_max_over_unit_lags(cc: &CrossCorrelation) -> f64 {
    (-1..=1)
        .filter_map(|n| cc.at(n))
        .map(f64::abs)
        .fold(0.0, f64::max)
}

/// `max(|C(-1)|, |C(0)|, |C(+1)|)`: absorbs the sign of the relation and a
/// one-day offset between trading sessions.
pub fn abs_corr_coefficient(x: &Series, y: &Series, opts: &CorrOptions) -> Result<f64> {
    cross_correlation(x, y, 1, opts).map(|cc| abs_max_over_unit_lags(&cc))
}

/// `sqrt(2 (1 - rho))` for an absolute coefficient `rho` in [0, 1].
pub fn distance(rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::OutOfRange {
            what: "absolute correlation".into(),
            value: rho,
        });
    }
    Ok((2.0 * (1.0 - rho)).sqrt())
}

fn write_matrix_csv<W: Write>(symbols: &[String], values: &[f64], out: W) -> std::io::Result<()> {
    let n = symbols.len();
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec![String::new()];
    header.extend(symbols.iter().cloned());
    writer.write_record(&header)?;
    for (i, symbol) in symbols.iter().enumerate() {
        let mut row = vec![symbol.clone()];
        row.extend(
            values[i * n..(i + 1) * n]
                .iter()
                .map(|v| format!("{v:.16e}")),
        );
        writer.write_record(&row)?;
    }
    writer.flush()
}

fn check_square(symbols: &[String], values: &[f64]) -> Result<()> {
    let n = symbols.len();
    if values.len() != n * n {
        return Err(Error::InvalidMatrix(format!(
            "{} entries for {n} symbols",
            values.len()
        )));
    }
    Ok(())
}

/// Symmetric matrix of absolute correlation coefficients with unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsCorrMatrix {
    symbols: Vec<String>,
    values: Vec<f64>,
}

impl AbsCorrMatrix {
    /// Row-major `values`; must be symmetric with entries in [0, 1] and unit diagonal.
    pub fn new(symbols: Vec<String>, values: Vec<f64>) -> Result<Self> {
        check_square(&symbols, &values)?;
        let n = symbols.len();
        for i in 0..n {
            if values[i * n + i] != 1.0 {
                return Err(Error::InvalidMatrix(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidMatrix(format!("entry ({i}, {j}) = {v}")));
                }
                if v != values[j * n + i] {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i}, {j}) is not symmetric"
                    )));
                }
            }
        }
        Ok(AbsCorrMatrix { symbols, values })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn n(&self) -> usize {
        self.symbols.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_matrix_csv(&self.symbols, &self.values, out)
    }
}

/// Absolute correlation coefficient of every pair of panel columns.
///
/// Pairs run in parallel; each entry is computed by the same sequential
/// kernel, so the result does not depend on the thread count.
pub fn build_abs_corr_matrix(panel: &Panel, opts: &CorrOptions) -> Result<AbsCorrMatrix> {
    let n = panel.n_assets();
    if n < 2 {
        return Err(Error::MatrixTooSmall(n));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let entries: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (x, y) = panel.pair_overlap(i, j);
            cross_correlation_aligned(panel.symbol(i), panel.symbol(j), &x, &y, 1, opts)
                .map(|cc| abs_max_over_unit_lags(&cc))
        })
        .collect();

    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
    }
    for (&(i, j), entry) in pairs.iter().zip(entries) {
        let rho = entry?;
        values[i * n + j] = rho;
        values[j * n + i] = rho;
    }
    Ok(AbsCorrMatrix {
        symbols: panel.symbols(),
        values,
    })
}

/// Symmetric matrix of distances in [0, sqrt 2] with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    symbols: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Row-major `values` in [0, sqrt 2] with zero diagonal. Symmetry is not
    /// enforced here; [`verify_metric_axioms`] reports it.
    pub fn new(symbols: Vec<String>, values: Vec<f64>) -> Result<Self> {
        check_square(&symbols, &values)?;
        let n = symbols.len();
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidMatrix(format!("diagonal entry {i} is not 0")));
            }
        }
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=SQRT_2).contains(*v))
        {
            return Err(Error::InvalidMatrix(format!(
                "entry ({}, {}) = {v} outside [0, sqrt 2]",
                k / n,
                k % n
            )));
        }
        Ok(DistanceMatrix { symbols, values })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn n(&self) -> usize {
        self.symbols.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_matrix_csv(&self.symbols, &self.values, out)
    }
}

/// Distinct assets whose coefficient is so close to 1 that their distance vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateDistance {
    pub a: String,
    pub b: String,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceConversion {
    pub matrix: DistanceMatrix,
    pub warnings: Vec<DegenerateDistance>,
}

pub fn to_distance_matrix(m: &AbsCorrMatrix) -> DistanceConversion {
    let n = m.n();
    let mut warnings = Vec::new();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let rho = m.get(i, j);
            values[i * n + j] = distance(rho).expect("matrix entries lie in [0, 1]");
            if i < j && rho >= DEGENERATE_RHO {
                warnings.push(DegenerateDistance {
                    a: m.symbols[i].clone(),
                    b: m.symbols[j].clone(),
                    rho,
                });
            }
        }
    }
    DistanceConversion {
        matrix: DistanceMatrix {
            symbols: m.symbols.clone(),
            values,
        },
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleViolation {
    /// `d(i, j) > d(i, k) + d(k, j)` for `(i, k, j)`.
    pub triple: (String, String, String),
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub n_assets: usize,
    pub symmetry_violations: Vec<(String, String)>,
    pub zero_distance_pairs: Vec<(String, String)>,
    pub triples_checked: usize,
    /// Minimum of `d_ik + d_kj - d_ij`; `None` with fewer than three assets.
    pub worst_slack: Option<f64>,
    pub worst_triple: Option<(String, String, String)>,
    pub triangle_violations: Vec<TriangleViolation>,
}

impl AxiomReport {
    /// Symmetry holds exactly and no triple breaks the triangle inequality.
    pub fn passes(&self) -> bool {
        self.symmetry_violations.is_empty() && self.triangle_violations.is_empty()
    }
}

pub fn verify_metric_axioms(d: &DistanceMatrix) -> AxiomReport {
    let n = d.n();
    let sym = |i: usize| d.symbols[i].clone();
    let mut symmetry_violations = Vec::new();
    let mut zero_distance_pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if d.get(i, j) != d.get(j, i) {
                symmetry_violations.push((sym(i), sym(j)));
            }
            if d.get(i, j) == 0.0 || d.get(j, i) == 0.0 {
                zero_distance_pairs.push((sym(i), sym(j)));
            }
        }
    }

    let mut triples_checked = 0;
    let mut worst: Option<(f64, usize, usize, usize)> = None;
    let mut triangle_violations = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let direct = d.get(i, j);
            for k in (0..n).filter(|&k| k != i && k != j) {
                triples_checked += 1;
                let slack = d.get(i, k) + d.get(k, j) - direct;
                if worst.is_none_or(|(w, ..)| slack < w) {
                    worst = Some((slack, i, k, j));
                }
                if slack < -TRIANGLE_TOLERANCE {
                    triangle_violations.push(TriangleViolation {
                        triple: (sym(i), sym(k), sym(j)),
                        slack,
                    });
                }
            }
        }
    }

    AxiomReport {
        n_assets: n,
        symmetry_violations,
        zero_distance_pairs,
        triples_checked,
        worst_slack: worst.map(|w| w.0),
        worst_triple: worst.map(|(_, i, k, j)| (sym(i), sym(k), sym(j))),
        triangle_violations,
    }
}
