//! Absolute-correlation minimum spanning trees and volatility time lags for
//! panels of daily asset prices.

pub mod correlation;
pub mod error;
pub mod lowess;
pub mod mst;
pub mod pipeline;
pub mod synthetic;
pub mod timelag;
pub mod timeseries;

pub use error::{Error, Result};
