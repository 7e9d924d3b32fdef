use super::features::{calendar_features, feature_names, normalize_lags};
use super::{fit_boost, lag_features, BoostConfig, TreeEnsemble};
use crate::error::{Error, Result};
use crate::series::{add_days, TimeSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct GbtForecastConfig {
    pub boost: BoostConfig,
    pub lags: Vec<usize>,
    pub calendar: bool,
}

impl Default for GbtForecastConfig {
    fn default() -> Self {
        Self {
            boost: BoostConfig::default(),
            lags: vec![1, 2, 3, 7, 14],
            calendar: true,
        }
    }
}

/// Boosted trees over lagged values, rolled forward one day at a time.
#[derive(Debug, Clone)]
pub struct GbtForecaster {
    pub ensemble: TreeEnsemble,
    pub lags: Vec<usize>,
    pub calendar: bool,
}

impl GbtForecaster {
    pub fn fit(series: &TimeSeries, config: &GbtForecastConfig) -> Result<Self> {
        let lags = normalize_lags(&config.lags)?;
        if lags.is_empty() {
            return Err(Error::Config("tree forecaster needs at least one lag".into()));
        }
        let m = lag_features(series, &lags, config.calendar)?;
        let ensemble = fit_boost(&m.x, &m.y, &m.names, &config.boost)?;
        debug_assert_eq!(ensemble.feature_names, feature_names(&lags, config.calendar));
        Ok(Self { ensemble, lags, calendar: config.calendar })
    }

    /// Forecasts the `horizon` days after `history` ends. Each prediction
    /// feeds the lags of the next; reported values are floored at 0.
    pub fn forecast(&self, history: &TimeSeries, horizon: usize) -> Result<Vec<f64>> {
        let max_lag = *self.lags.last().expect("non-empty lags");
        if history.len() < max_lag {
            return Err(Error::Length(format!(
                "forecast needs the last {max_lag} days, history has {}",
                history.len()
            )));
        }
        let tail = &history.values()[history.len() - max_lag..];
        let mut window: Vec<f64> = tail
            .iter()
            .copied()
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::Gap {
                start: history.date_at(history.len() - max_lag),
                length: max_lag,
            })?;
        let mut out = Vec::with_capacity(horizon);
        for step in 0..horizon {
            let date = add_days(history.end(), step + 1);
            let mut row: Vec<f64> = self.lags.iter().map(|l| window[window.len() - l]).collect();
            if self.calendar {
                row.extend(calendar_features(date));
            }
            let next = self.ensemble.predict(&row);
            window.push(next);
            out.push(next.max(0.0));
        }
        Ok(out)
    }
}
