//! Settings file support. Every flag has a snake_case key; values given on
//! the command line win over the file, and the file wins over defaults.

use std::path::{Path, PathBuf};

use absmst::correlation::Moments;
use absmst::lowess::{LocalRegion, LowessConfig};
use absmst::pipeline::{MatrixLayout, PipelineConfig};
use absmst::timeseries::PriceFormat;
use absmst::Error;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prices: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price_format: Option<PriceFormat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<NaiveDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<NaiveDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yearly: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_lag: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lowess_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lowess_window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lowess_robustness: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_obs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global_moments: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub references: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub include_self: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_curves: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effect: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<MatrixLayout>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volatility: Option<bool>,
}

pub fn load(path: &Path) -> Result<Settings, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

impl Settings {
    /// Fills every unset field of `self` from `lower`.
    pub fn or(self, lower: Settings) -> Settings {
        // a region chosen on the command line replaces either region key in the file
        let region_set = self.lowess_k.is_some() || self.lowess_window.is_some();
        Settings {
            prices: self.prices.or(lower.prices),
            price_format: self.price_format.or(lower.price_format),
            meta: self.meta.or(lower.meta),
            out: self.out.or(lower.out),
            from: self.from.or(lower.from),
            to: self.to.or(lower.to),
            yearly: self.yearly.or(lower.yearly),
            max_lag: self.max_lag.or(lower.max_lag),
            lowess_k: if region_set {
                self.lowess_k
            } else {
                lower.lowess_k
            },
            lowess_window: if region_set {
                self.lowess_window
            } else {
                lower.lowess_window
            },
            lowess_robustness: self.lowess_robustness.or(lower.lowess_robustness),
            min_obs: self.min_obs.or(lower.min_obs),
            global_moments: self.global_moments.or(lower.global_moments),
            target: self.target.or(lower.target),
            references: self.references.or(lower.references),
            include_self: self.include_self.or(lower.include_self),
            dump_curves: self.dump_curves.or(lower.dump_curves),
            cause: self.cause.or(lower.cause),
            effect: self.effect.or(lower.effect),
            order: self.order.or(lower.order),
            format: self.format.or(lower.format),
            volatility: self.volatility.or(lower.volatility),
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, Error> {
        let defaults = PipelineConfig::default();
        let region = match (self.lowess_k, self.lowess_window) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "lowess_k and lowess_window are mutually exclusive".into(),
                ))
            }
            (Some(k), None) => LocalRegion::Nearest(k),
            (None, Some(w)) => LocalRegion::Window(w),
            (None, None) => defaults.lowess.region,
        };
        let config = PipelineConfig {
            from: self.from,
            to: self.to,
            yearly: self.yearly.unwrap_or(defaults.yearly),
            max_lag: self.max_lag.unwrap_or(defaults.max_lag),
            lowess: LowessConfig {
                region,
                robustness_iterations: self
                    .lowess_robustness
                    .unwrap_or(defaults.lowess.robustness_iterations),
            },
            min_obs: self.min_obs.unwrap_or(defaults.min_obs),
            moments: if self.global_moments.unwrap_or(false) {
                Moments::Global
            } else {
                defaults.moments
            },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, Error> {
        value.as_ref().ok_or_else(|| {
            Error::InvalidConfig(format!(
                "missing --{flag} (or `{}` in the settings file)",
                flag.replace('-', "_")
            ))
        })
    }
}
