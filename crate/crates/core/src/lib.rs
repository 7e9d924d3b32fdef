//! Counterfactual forecasting for daily air-pollutant series.

pub mod boost;
pub mod counterfactual;
pub mod error;
pub mod lstm;
pub mod optim;
pub mod report;
pub mod sarima;
pub mod series;
pub mod synthetic;

pub use error::{Error, Result};
