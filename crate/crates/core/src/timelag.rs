//! Volatility time lags from LOWESS-smoothed cross-correlation peaks, lag
//! summaries across reference sets, and a bivariate Granger F-test.
//!
//! Sign convention: `estimate_lag(x, y)` returns a positive lag when `y`
//! follows `x`, i.e. when `corr(x_t, y_{t+n})` peaks at `n > 0`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::correlation::{cross_correlation, overlap, CorrOptions};
use crate::error::{Error, Result};
use crate::lowess::{argmax_smoothed, lowess_smooth, LowessConfig, SmoothedCurve};
use crate::timeseries::Series;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagOptions {
    pub max_lag: usize,
    pub lowess: LowessConfig,
    pub corr: CorrOptions,
}

impl Default for LagOptions {
    fn default() -> Self {
        LagOptions {
            max_lag: 150,
            lowess: LowessConfig::default(),
            corr: CorrOptions::default(),
        }
    }
}

/// Smoothed peaks below `2 / sqrt(overlap)` are flagged low-confidence.
pub fn significance_threshold(overlap: usize) -> f64 {
    2.0 / (overlap as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagEstimate {
    pub pair: (String, String),
    pub lag_days: i64,
    /// Smoothed cross-correlation at `lag_days`.
    pub peak_value: f64,
    /// Unsmoothed cross-correlation at `lag_days`.
    pub raw_peak_value: f64,
    pub overlap: usize,
    pub low_confidence: bool,
    pub max_lag: usize,
    pub lowess: LowessConfig,
}

/// Lag estimate together with the curve it was read from.
pub fn estimate_lag_with_curve(
    x: &Series,
    y: &Series,
    opts: &LagOptions,
) -> Result<(LagEstimate, SmoothedCurve)> {
    let (_, a, _) = overlap(x, y);
    let required = opts.corr.min_obs + opts.max_lag;
    if a.len() < required {
        return Err(Error::InsufficientOverlap {
            a: x.symbol().to_string(),
            b: y.symbol().to_string(),
            overlap: a.len(),
            required,
        });
    }
    let cc = cross_correlation(x, y, opts.max_lag, &opts.corr)?;
    let points: Vec<(f64, f64)> = cc.defined().map(|(n, v)| (n as f64, v)).collect();
    let curve = lowess_smooth(&points, &opts.lowess)?;
    let (lag, peak_value) = argmax_smoothed(&curve)?;
    let lag_days = lag as i64;
    let estimate = LagEstimate {
        pair: cc.pair.clone(),
        lag_days,
        peak_value,
        raw_peak_value: cc.at(lag_days).expect("smoothed lags are defined lags"),
        overlap: cc.overlap,
        low_confidence: peak_value < significance_threshold(cc.overlap),
        max_lag: opts.max_lag,
        lowess: opts.lowess,
    };
    Ok((estimate, curve))
}

pub fn estimate_lag(x: &Series, y: &Series, opts: &LagOptions) -> Result<LagEstimate> {
    estimate_lag_with_curve(x, y, opts).map(|(e, _)| e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub reference: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSummary {
    pub target: String,
    pub reference_label: String,
    /// Mean lag in days; positive means the target lags the references.
    pub mean_lag: Option<f64>,
    /// Population standard deviation of the per-pair lags.
    pub std_lag: Option<f64>,
    pub estimates: Vec<LagEstimate>,
    pub skipped: Vec<SkippedPair>,
    #[serde(skip)]
    pub curves: Vec<SmoothedCurve>,
}

fn mean_and_std(lags: &[i64]) -> (Option<f64>, Option<f64>) {
    if lags.is_empty() {
        return (None, None);
    }
    let n = lags.len() as f64;
    let mean = lags.iter().map(|&l| l as f64).sum::<f64>() / n;
    let var = lags.iter().map(|&l| (l as f64 - mean).powi(2)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

/// Estimates the lag of `target` behind each reference. Pairs that fail are
/// listed in `skipped`; estimates and curves keep the reference order.
pub fn lag_summary(
    target: &Series,
    references: &[Series],
    reference_label: impl Into<String>,
    opts: &LagOptions,
) -> LagSummary {
    let results: Vec<Result<(LagEstimate, SmoothedCurve)>> = references
        .par_iter()
        .map(|r| estimate_lag_with_curve(r, target, opts))
        .collect();
    let mut estimates = Vec::new();
    let mut curves = Vec::new();
    let mut skipped = Vec::new();
    for (reference, result) in references.iter().zip(results) {
        match result {
            Ok((e, c)) => {
                estimates.push(e);
                curves.push(c);
            }
            Err(err) => skipped.push(SkippedPair {
                reference: reference.symbol().to_string(),
                reason: err.to_string(),
            }),
        }
    }
    let lags: Vec<i64> = estimates.iter().map(|e| e.lag_days).collect();
    let (mean_lag, std_lag) = mean_and_std(&lags);
    LagSummary {
        target: target.symbol().to_string(),
        reference_label: reference_label.into(),
        mean_lag,
        std_lag,
        estimates,
        skipped,
        curves,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `target,reference,lag_days,peak,raw_peak,flag`, one row per pair.
pub fn write_lag_table<W: Write>(summaries: &[LagSummary], out: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "target",
        "reference",
        "lag_days",
        "peak",
        "raw_peak",
        "flag",
    ])?;
    for s in summaries {
        for e in &s.estimates {
            let flag = if e.low_confidence {
                "low_confidence"
            } else {
                "ok"
            };
            writer.write_record([
                s.target.as_str(),
                e.pair.0.as_str(),
                &e.lag_days.to_string(),
                &e.peak_value.to_string(),
                &e.raw_peak_value.to_string(),
                flag,
            ])?;
        }
        for k in &s.skipped {
            writer.write_record([
                s.target.as_str(),
                k.reference.as_str(),
                "",
                "",
                "",
                &format!("skipped: {}", k.reason),
            ])?;
        }
    }
    writer.flush()
}

/// `target,reference_set,pairs,skipped,mean_lag,std_lag`, one row per target.
pub fn write_lag_summary<W: Write>(summaries: &[LagSummary], out: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "target",
        "reference_set",
        "pairs",
        "skipped",
        "mean_lag",
        "std_lag",
    ])?;
    for s in summaries {
        writer.write_record([
            s.target.clone(),
            s.reference_label.clone(),
            s.estimates.len().to_string(),
            s.skipped.len().to_string(),
            fmt_opt(s.mean_lag),
            fmt_opt(s.std_lag),
        ])?;
    }
    writer.flush()
}

/// `lag,raw,smoothed` for one pair.
pub fn write_curve<W: Write>(curve: &SmoothedCurve, out: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["lag", "raw", "smoothed"])?;
    for ((x, r), s) in curve.xs.iter().zip(&curve.raw).zip(&curve.smoothed) {
        writer.write_record([(*x as i64).to_string(), r.to_string(), s.to_string()])?;
    }
    writer.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    /// Candidate cause and the series it is tested to forecast.
    pub pair: (String, String),
    pub order: usize,
    /// Regression rows, i.e. overlap length minus `order`.
    pub n_obs: usize,
    pub df_num: usize,
    pub df_den: usize,
    pub rss_restricted: f64,
    pub rss_unrestricted: f64,
    pub f_stat: f64,
    pub p_value: f64,
}

fn least_squares_rss(design: DMatrix<f64>, target: &DVector<f64>) -> Result<f64> {
    let cols = design.ncols();
    let svd = design.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let tol = largest * (design.nrows().max(cols) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank < cols {
        return Err(Error::SingularDesign(format!(
            "rank {rank} of {cols} columns"
        )));
    }
    let beta = svd
        .solve(target, tol)
        .map_err(|e| Error::SingularDesign(e.to_string()))?;
    let residuals = target - design * beta;
    Ok(residuals.norm_squared())
}

/// Tests whether `order` lags of `cause` improve a least-squares forecast of
/// `effect` beyond `order` of its own lags.
pub fn granger_test(cause: &Series, effect: &Series, order: usize) -> Result<GrangerResult> {
    if order == 0 {
        return Err(Error::InvalidConfig(
            "Granger order must be positive".into(),
        ));
    }
    let (_, x, y) = overlap(cause, effect);
    let m = x.len();
    if m < 10 * order {
        return Err(Error::InsufficientOverlap {
            a: cause.symbol().to_string(),
            b: effect.symbol().to_string(),
            overlap: m,
            required: 10 * order,
        });
    }
    let n_obs = m - order;
    let df_den = n_obs - 2 * order - 1;
    let target = DVector::from_iterator(n_obs, y[order..].iter().copied());
    let own_lags = |row: usize, col: usize| -> f64 {
        match col {
            0 => 1.0,
            c if c <= order => y[row + order - c],
            c => x[row + order - (c - order)],
        }
    };
    let restricted = DMatrix::from_fn(n_obs, order + 1, own_lags);
    let unrestricted = DMatrix::from_fn(n_obs, 2 * order + 1, own_lags);
    let rss_restricted = least_squares_rss(restricted, &target)?;
    let rss_unrestricted = least_squares_rss(unrestricted, &target)
        .map_err(|e| e.context(format!("lags of {}", cause.symbol())))?;

    let (f_stat, p_value) = if rss_unrestricted <= 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (((rss_restricted - rss_unrestricted) / order as f64)
            / (rss_unrestricted / df_den as f64))
            .max(0.0);
        let dist = FisherSnedecor::new(order as f64, df_den as f64)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        (f, dist.sf(f).clamp(0.0, 1.0))
    };
    Ok(GrangerResult {
        pair: (cause.symbol().to_string(), effect.symbol().to_string()),
        order,
        n_obs,
        df_num: order,
        df_den,
        rss_restricted,
        rss_unrestricted,
        f_stat,
        p_value,
    })
}

pub fn write_granger<W: Write>(results: &[GrangerResult], out: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["cause", "effect", "order", "n_obs", "f_stat", "p_value"])?;
    for r in results {
        writer.write_record([
            r.pair.0.clone(),
            r.pair.1.clone(),
            r.order.to_string(),
            r.n_obs.to_string(),
            r.f_stat.to_string(),
            r.p_value.to_string(),
        ])?;
    }
    writer.flush()
}
