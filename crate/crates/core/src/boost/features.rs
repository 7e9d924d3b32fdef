use chrono::{Datelike, NaiveDate};

use super::{feature_importance, fit_boost, BoostConfig, FeatureImportance, Loss, TreeEnsemble};
use crate::error::{Error, Result};
use crate::series::{TimeSeries, Variable};

/// Supervised rows built from one series.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMatrix {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// Date of each row's target.
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
}

/// Day of week (Monday = 0) and day of year (1-based).
pub(crate) fn calendar_features(date: NaiveDate) -> [f64; 2] {
    [
        date.weekday().num_days_from_monday() as f64,
        date.ordinal() as f64,
    ]
}

pub(crate) fn feature_names(lags: &[usize], calendar: bool) -> Vec<String> {
    let mut names: Vec<String> = lags.iter().map(|l| format!("lag{l}")).collect();
    if calendar {
        names.push("weekday".into());
        names.push("day_of_year".into());
    }
    names
}

pub(crate) fn normalize_lags(lags: &[usize]) -> Result<Vec<usize>> {
    let mut lags = lags.to_vec();
    lags.sort_unstable();
    lags.dedup();
    if lags.first() == Some(&0) {
        return Err(Error::Config("lag 0 would leak the target".into()));
    }
    Ok(lags)
}

/// Row `t` holds `y[t - l]` for each lag (ascending), then optionally the
/// calendar features of day `t`; the target is `y[t]`. Rows touching a
/// missing value are dropped.
pub fn lag_features(s: &TimeSeries, lags: &[usize], calendar: bool) -> Result<LagMatrix> {
    let lags = normalize_lags(lags)?;
    let max_lag = lags.last().copied().unwrap_or(0);
    if max_lag >= s.len() {
        return Err(Error::Length(format!(
            "largest lag {max_lag} needs more than {} observations",
            s.len()
        )));
    }
    let v = s.values();
    let mut out = LagMatrix {
        x: Vec::new(),
        y: Vec::new(),
        dates: Vec::new(),
        names: feature_names(&lags, calendar),
    };
    for t in max_lag..v.len() {
        let Some(target) = v[t] else { continue };
        let Some(mut row) = lags.iter().map(|l| v[t - l]).collect::<Option<Vec<f64>>>() else {
            continue;
        };
        let date = s.date_at(t);
        if calendar {
            row.extend(calendar_features(date));
        }
        out.x.push(row);
        out.y.push(target);
        out.dates.push(date);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct InfluenceReport {
    pub importance: Vec<FeatureImportance>,
    /// Share of holdout days classified correctly at probability 0.5.
    pub accuracy: f64,
    pub cutoff: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub ensemble: TreeEnsemble,
}

/// Classifies days as `AQI > cutoff` from the six pollutant concentrations
/// and reports which pollutants the classifier leans on.
///
/// Only days with AQI and all six pollutants observed are used. The first
/// `split_fraction` of those days (in date order) train the model and the rest
/// measure accuracy. `config.loss` is forced to logistic.
pub fn aqi_influence(
    table: &[TimeSeries],
    cutoff: f64,
    split_fraction: f64,
    config: &BoostConfig,
) -> Result<InfluenceReport> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::Config(format!("split fraction {split_fraction} outside (0, 1)")));
    }
    let find = |v: Variable| {
        table
            .iter()
            .find(|s| s.variable() == v)
            .ok_or_else(|| Error::Schema(format!("missing column {}", v.column_name())))
    };
    let aqi = find(Variable::Aqi)?;
    let pollutants = Variable::POLLUTANTS
        .iter()
        .map(|v| find(*v))
        .collect::<Result<Vec<_>>>()?;

    let start = pollutants.iter().map(|s| s.start()).fold(aqi.start(), NaiveDate::max);
    let end = pollutants.iter().map(|s| s.end()).fold(aqi.end(), NaiveDate::min);
    let mut x = Vec::new();
    let mut labels = Vec::new();
    let mut date = start;
    while date <= end {
        let value = |s: &TimeSeries| s.index_of(date).and_then(|i| s.values()[i]);
        if let (Some(a), Some(row)) = (
            value(aqi),
            pollutants.iter().map(|s| value(s)).collect::<Option<Vec<f64>>>(),
        ) {
            x.push(row);
            labels.push(if a > cutoff { 1.0 } else { 0.0 });
        }
        date = date.succ_opt().expect("date in range");
    }

    let n_train = (x.len() as f64 * split_fraction).floor() as usize;
    if n_train < 2 || n_train >= x.len() {
        return Err(Error::Length(format!(
            "{} complete days cannot be split {split_fraction} into train and test",
            x.len()
        )));
    }
    let positives = labels[..n_train].iter().filter(|v| **v == 1.0).count();
    if positives == 0 || positives == n_train {
        return Err(Error::Label(format!(
            "every training day falls on one side of AQI {cutoff}; try a different cutoff"
        )));
    }

    let names: Vec<String> = Variable::POLLUTANTS
        .iter()
        .map(|v| v.column_name().to_string())
        .collect();
    let config = BoostConfig { loss: Loss::Logistic, ..*config };
    let ensemble = fit_boost(&x[..n_train], &labels[..n_train], &names, &config)?;
    let correct = x[n_train..]
        .iter()
        .zip(&labels[n_train..])
        .filter(|(row, label)| (ensemble.predict_proba(row) > 0.5) == (**label == 1.0))
        .count();
    let n_test = x.len() - n_train;
    Ok(InfluenceReport {
        importance: feature_importance(&ensemble),
        accuracy: correct as f64 / n_test as f64,
        cutoff,
        n_train,
        n_test,
        ensemble,
    })
}
