//! Synthetic panels with known structure: block-correlated factor returns
//! and stochastic-volatility pairs whose volatility follows with a set lag.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::timeseries::{AssetClass, AssetMeta, PriceSeries, Series, SeriesKind};

/// First trading day used by the generators.
pub fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2007, 1, 1).expect("valid date")
}

/// `n` consecutive weekdays starting at `start` (or the next weekday).
pub fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(n)
        .collect()
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// One global factor plus one factor per class, scaled so that returns
/// within a class correlate at `intra` and across classes at `inter`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorModel {
    pub intra: f64,
    pub inter: f64,
    pub daily_vol: f64,
}

impl Default for FactorModel {
    fn default() -> Self {
        FactorModel {
            intra: 0.6,
            inter: 0.1,
            daily_vol: 0.01,
        }
    }
}

fn class_prefix(class: AssetClass) -> &'static str {
    match class {
        AssetClass::StockIndex => "STK",
        AssetClass::CurrencyFuture => "CUR",
        AssetClass::CommodityFuture => "CMD",
    }
}

/// Return series of length `len` for `count` assets per listed class, named
/// `STK00`, `CUR00`, `CMD00`, ... and dated on weekdays.
pub fn block_factor_returns<R: Rng + ?Sized>(
    rng: &mut R,
    classes: &[(AssetClass, usize)],
    len: usize,
    model: &FactorModel,
) -> (Vec<Series>, Vec<AssetMeta>) {
    assert!(0.0 <= model.inter && model.inter <= model.intra && model.intra <= 1.0);
    let dates = weekdays(default_start(), len);
    let (a, b, e) = (
        model.inter.sqrt(),
        (model.intra - model.inter).sqrt(),
        (1.0 - model.intra).sqrt(),
    );
    let global: Vec<f64> = (0..len).map(|_| normal(rng)).collect();
    let mut series = Vec::new();
    let mut meta = Vec::new();
    for &(class, count) in classes {
        let factor: Vec<f64> = (0..len).map(|_| normal(rng)).collect();
        for k in 0..count {
            let symbol = format!("{}{:02}", class_prefix(class), k);
            let values = (0..len)
                .map(|t| model.daily_vol * (a * global[t] + b * factor[t] + e * normal(rng)))
                .collect();
            series.push(
                Series::new(symbol.clone(), SeriesKind::Return, dates.clone(), values)
                    .expect("generated returns are finite"),
            );
            meta.push(AssetMeta::new(symbol, class));
        }
    }
    (series, meta)
}

/// Prices starting at 100 on the weekday before the first return, whose log
/// returns reproduce `returns`.
pub fn prices_from_returns(returns: &Series) -> PriceSeries {
    let mut start = returns.dates()[0].pred_opt().expect("valid date");
    while matches!(start.weekday(), Weekday::Sat | Weekday::Sun) {
        start = start.pred_opt().expect("valid date");
    }
    let mut log_price = 100f64.ln();
    let mut obs = vec![(start, 100.0)];
    for (d, r) in returns.dates().iter().zip(returns.values()) {
        log_price += r;
        obs.push((*d, log_price.exp()));
    }
    PriceSeries::new(returns.symbol(), obs).expect("generated prices are positive")
}

/// Absolute returns are `daily_vol * exp(log_vol_scale * g + noise_scale * e)`
/// with `g` a unit-variance AR(1) latent factor and `e` white noise.
/// Followers load on the leader's latent factor with weight `coupling`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolatilityCoupling {
    pub persistence: f64,
    pub log_vol_scale: f64,
    pub noise_scale: f64,
    pub coupling: f64,
    pub daily_vol: f64,
}

impl Default for VolatilityCoupling {
    fn default() -> Self {
        VolatilityCoupling {
            persistence: 0.2,
            log_vol_scale: 0.1,
            noise_scale: 0.0,
            coupling: 1.0,
            daily_vol: 0.01,
        }
    }
}

fn latent_ar1<R: Rng + ?Sized>(rng: &mut R, len: usize, phi: f64) -> Vec<f64> {
    let innovation = (1.0 - phi * phi).sqrt();
    let mut g = normal(rng);
    (0..len)
        .map(|_| {
            let out = g;
            g = phi * g + innovation * normal(rng);
            out
        })
        .collect()
}

fn returns_from_latent<R: Rng + ?Sized>(
    rng: &mut R,
    latent: &[f64],
    cfg: &VolatilityCoupling,
) -> Vec<f64> {
    latent
        .iter()
        .map(|g| {
            let size =
                cfg.daily_vol * (cfg.log_vol_scale * g + cfg.noise_scale * normal(rng)).exp();
            if rng.random::<bool>() {
                size
            } else {
                -size
            }
        })
        .collect()
}

fn volatility(symbol: &str, returns: Vec<f64>) -> Series {
    let dates = weekdays(default_start(), returns.len());
    let values = returns.into_iter().map(f64::abs).collect();
    Series::new(symbol, SeriesKind::Volatility, dates, values)
        .expect("generated volatility is valid")
}

/// Returns of a target and of one reference per entry of `lags`; the
/// target's volatility follows reference `i` by `lags[i]` days.
pub fn coupled_returns_group<R: Rng + ?Sized>(
    rng: &mut R,
    len: usize,
    lags: &[usize],
    cfg: &VolatilityCoupling,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let lead = lags.iter().copied().max().unwrap_or(0);
    let shared = latent_ar1(rng, len + lead, cfg.persistence);
    let c = cfg.coupling.clamp(0.0, 1.0);
    let own = latent_ar1(rng, len, cfg.persistence);
    let target_latent: Vec<f64> = shared[..len]
        .iter()
        .zip(&own)
        .map(|(a, b)| c * a + (1.0 - c * c).sqrt() * b)
        .collect();
    let target = returns_from_latent(rng, &target_latent, cfg);
    let references = lags
        .iter()
        .map(|&lag| returns_from_latent(rng, &shared[lag..lag + len], cfg))
        .collect();
    (target, references)
}

/// Volatility pair `(X, Y)` where `Y` follows `X` by `lag` days. A coupling
/// of zero yields independent series.
pub fn coupled_volatility_pair<R: Rng + ?Sized>(
    rng: &mut R,
    len: usize,
    lag: usize,
    cfg: &VolatilityCoupling,
) -> (Series, Series) {
    let (target, mut refs) = coupled_returns_group(rng, len, &[lag], cfg);
    (volatility("X", refs.remove(0)), volatility("Y", target))
}

/// Volatility of a target `T` and references `R00`, ... it follows by the given lags.
pub fn coupled_volatility_group<R: Rng + ?Sized>(
    rng: &mut R,
    len: usize,
    lags: &[usize],
    cfg: &VolatilityCoupling,
) -> (Series, Vec<Series>) {
    let (target, refs) = coupled_returns_group(rng, len, lags, cfg);
    let refs = refs
        .into_iter()
        .enumerate()
        .map(|(i, r)| volatility(&format!("R{i:02}"), r))
        .collect();
    (volatility("T", target), refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::pearson;
    use crate::timeseries::compute_returns;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weekdays_skip_weekends() {
        let d = weekdays(NaiveDate::from_ymd_opt(2007, 1, 5).unwrap(), 3);
        assert_eq!(d[1], NaiveDate::from_ymd_opt(2007, 1, 8).unwrap());
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn block_correlations_near_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let classes = [
            (AssetClass::StockIndex, 2),
            (AssetClass::CommodityFuture, 1),
        ];
        let (s, meta) = block_factor_returns(&mut rng, &classes, 20_000, &FactorModel::default());
        assert_eq!(
            meta.iter().map(|m| m.symbol.as_str()).collect::<Vec<_>>(),
            ["STK00", "STK01", "CMD00"]
        );
        let intra = pearson(s[0].values(), s[1].values()).unwrap();
        let inter = pearson(s[0].values(), s[2].values()).unwrap();
        assert!((intra - 0.6).abs() < 0.03, "{intra}");
        assert!((inter - 0.1).abs() < 0.03, "{inter}");
    }

    #[test]
    fn prices_round_trip_to_returns() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (s, _) = block_factor_returns(
            &mut rng,
            &[(AssetClass::StockIndex, 1)],
            50,
            &FactorModel::default(),
        );
        let back = compute_returns(&prices_from_returns(&s[0]));
        assert_eq!(back.dates(), s[0].dates());
        for (a, b) in back.values().iter().zip(s[0].values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
