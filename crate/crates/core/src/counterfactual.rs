//! Fit on the pre-intervention window, forecast the intervention window and
//! compare with what was observed.

use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::boost::{GbtForecastConfig, GbtForecaster};
use crate::error::{Error, Result};
use crate::lstm::{self, LstmConfig};
use crate::sarima::{self, SarimaGrid};
use crate::series::{fill_for_fitting, split, SplitSpec, TimeSeries, Variable, DEFAULT_MAX_GAP};

/// Forecast of the days right after a training series.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelForecast {
    pub mean: Vec<f64>,
    /// 95% band, when the model provides one.
    pub interval: Option<(Vec<f64>, Vec<f64>)>,
    /// One-line description of the fitted model.
    pub summary: String,
}

/// Anything that can learn from a fully observed history and extend it.
pub trait Forecaster: Sync {
    fn name(&self) -> String;
    fn fit_forecast(&self, train: &TimeSeries, horizon: usize) -> Result<ModelForecast>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    /// AIC-selected over the grid; a single-candidate grid fixes the order.
    Sarima(SarimaGrid),
    Lstm(LstmConfig),
    Gbt(GbtForecastConfig),
}

impl ModelChoice {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelChoice::Sarima(_) => "sarima",
            ModelChoice::Lstm(_) => "lstm",
            ModelChoice::Gbt(_) => "gbt",
        }
    }

    /// Default configuration for `sarima`, `lstm` or `gbt`.
    pub fn from_kind(kind: &str) -> Result<Self> {
        match kind.to_ascii_lowercase().as_str() {
            "sarima" => Ok(ModelChoice::Sarima(SarimaGrid::default())),
            "lstm" => Ok(ModelChoice::Lstm(LstmConfig::default())),
            "gbt" | "xgboost" => Ok(ModelChoice::Gbt(GbtForecastConfig::default())),
            other => Err(Error::Config(format!(
                "unknown model {other:?}; expected sarima, lstm or gbt"
            ))),
        }
    }

    /// Same model with its random seed replaced; only the LSTM is stochastic.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let ModelChoice::Lstm(cfg) = &mut self {
            cfg.seed = seed;
        }
        self
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind())
    }
}

impl Forecaster for ModelChoice {
    fn name(&self) -> String {
        self.kind().to_string()
    }

    fn fit_forecast(&self, train: &TimeSeries, horizon: usize) -> Result<ModelForecast> {
        match self {
            ModelChoice::Sarima(grid) => {
                let search = sarima::grid_search(train, grid)?;
                let fc = sarima::forecast(&search.best, train, horizon)?;
                Ok(ModelForecast {
                    mean: fc.mean,
                    interval: Some((fc.lower95, fc.upper95)),
                    summary: format!("{} aic={:.3}", search.best.spec, search.best.aic),
                })
            }
            ModelChoice::Lstm(cfg) => {
                let trained = lstm::train(train, cfg)?;
                let y = train.complete_values()?;
                let tail = &y[y.len() - cfg.window..];
                let mean = lstm::forecast_recursive(&trained.net, tail, horizon)?;
                let loss = trained.loss_curve.last().copied().unwrap_or(f64::NAN);
                Ok(ModelForecast {
                    mean,
                    interval: None,
                    summary: format!(
                        "lstm hidden={} window={} epochs={} seed={} final_loss={loss:.6}",
                        cfg.hidden_size, cfg.window, cfg.epochs, cfg.seed
                    ),
                })
            }
            ModelChoice::Gbt(cfg) => {
                let model = GbtForecaster::fit(train, cfg)?;
                let mean = model.forecast(train, horizon)?;
                let lags: Vec<String> = model.lags.iter().map(|l| l.to_string()).collect();
                Ok(ModelForecast {
                    mean,
                    interval: None,
                    summary: format!(
                        "gbt rounds={} depth={} eta={} lags={} calendar={} (feature set assumed)",
                        cfg.boost.num_rounds,
                        cfg.boost.max_depth,
                        cfg.boost.learning_rate,
                        lags.join("/"),
                        cfg.calendar
                    ),
                })
            }
        }
    }
}

/// Mean squared difference.
pub fn mse(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() || observed.is_empty() {
        return Err(Error::Length(format!(
            "mse of {} observed vs {} predicted values",
            observed.len(),
            predicted.len()
        )));
    }
    Ok(observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p).powi(2))
        .sum::<f64>()
        / observed.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyRow {
    pub date: NaiveDate,
    pub observed: Option<f64>,
    pub predicted: f64,
    pub lower95: Option<f64>,
    pub upper95: Option<f64>,
}

/// Observed minus counterfactual over the predict window. Days with no
/// observation are listed in `daily` but left out of every summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualReport {
    pub variable: Variable,
    pub split: SplitSpec,
    pub model: String,
    pub model_summary: String,
    pub daily: Vec<DailyRow>,
    pub mean_excess: f64,
    pub total_excess: f64,
    /// `100 * mean_excess / mean(predicted)`; NaN when the predicted mean is 0.
    pub pct_change: f64,
    /// Standard error of `mean_excess` treating daily excesses as independent.
    pub excess_se: f64,
    pub days_used: usize,
    pub missing_days: usize,
}

fn fitting_series(train: &TimeSeries) -> Result<TimeSeries> {
    let filled = fill_for_fitting(train, DEFAULT_MAX_GAP)?;
    TimeSeries::from_values(train.variable(), train.start(), &filled)
}

fn forecast_window(
    s: &TimeSeries,
    spec: &SplitSpec,
    model: &dyn Forecaster,
) -> Result<(TimeSeries, ModelForecast)> {
    let (train, predict) = split(s, spec)?;
    let train = fitting_series(&train)?;
    let horizon = spec.horizon();
    let fc = model.fit_forecast(&train, horizon)?;
    if fc.mean.len() != horizon {
        return Err(Error::Length(format!(
            "{} returned {} forecasts for a {horizon}-day window",
            model.name(),
            fc.mean.len()
        )));
    }
    Ok((predict, fc))
}

fn daily_rows(predict: &TimeSeries, fc: &ModelForecast) -> Vec<DailyRow> {
    (0..fc.mean.len())
        .map(|k| DailyRow {
            date: predict.date_at(k),
            observed: predict.values()[k],
            predicted: fc.mean[k],
            lower95: fc.interval.as_ref().map(|(lo, _)| lo[k]),
            upper95: fc.interval.as_ref().map(|(_, hi)| hi[k]),
        })
        .collect()
}

fn paired(observed: &TimeSeries, predicted: &[f64]) -> (Vec<f64>, Vec<f64>) {
    observed
        .values()
        .iter()
        .zip(predicted)
        .filter_map(|(o, p)| o.map(|o| (o, *p)))
        .unzip()
}

pub fn run_counterfactual(
    s: &TimeSeries,
    spec: &SplitSpec,
    model: &dyn Forecaster,
) -> Result<CounterfactualReport> {
    let (predict, fc) = forecast_window(s, spec, model)?;
    let (obs, pred) = paired(&predict, &fc.mean);
    if obs.is_empty() {
        return Err(Error::Window(format!(
            "no observed days between {} and {}",
            spec.predict_start, spec.predict_end
        )));
    }
    let n = obs.len() as f64;
    let excess: Vec<f64> = obs.iter().zip(&pred).map(|(o, p)| o - p).collect();
    let total_excess: f64 = excess.iter().sum();
    let mean_excess = total_excess / n;
    let mean_pred = pred.iter().sum::<f64>() / n;
    let pct_change = if mean_pred != 0.0 {
        100.0 * mean_excess / mean_pred
    } else {
        f64::NAN
    };
    let excess_se = if excess.len() > 1 {
        let var = excess.iter().map(|e| (e - mean_excess).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::NAN
    };
    Ok(CounterfactualReport {
        variable: s.variable(),
        split: *spec,
        model: model.name(),
        daily: daily_rows(&predict, &fc),
        model_summary: fc.summary,
        mean_excess,
        total_excess,
        pct_change,
        excess_se,
        days_used: obs.len(),
        missing_days: predict.missing_count(),
    })
}

/// `date,observed,predicted,lower95,upper95` in shortest round-trip form,
/// blank cells where absent.
pub fn write_daily_csv<W: Write>(rows: &[DailyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["date", "observed", "predicted", "lower95", "upper95"])
        .map_err(err)?;
    let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.date.to_string(),
            cell(r.observed),
            r.predicted.to_string(),
            cell(r.lower95),
            cell(r.upper95),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

impl CounterfactualReport {
    pub fn write_daily_csv<W: Write>(&self, out: W) -> Result<()> {
        write_daily_csv(&self.daily, out)
    }

    /// `key = value` lines.
    pub fn summary_text(&self) -> String {
        let s = &self.split;
        [
            format!("variable = {}", self.variable.column_name()),
            format!("model = {}", self.model),
            format!("fitted = {}", self.model_summary),
            format!("train = {}..{}", s.train_start, s.train_end),
            format!("predict = {}..{}", s.predict_start, s.predict_end),
            format!("days_used = {}", self.days_used),
            format!("missing_days = {}", self.missing_days),
            format!("mean_excess = {:.6}", self.mean_excess),
            format!("excess_se = {:.6}", self.excess_se),
            format!("total_excess = {:.6}", self.total_excess),
            format!("pct_change = {:.6}", self.pct_change),
            if self.daily.iter().any(|d| d.lower95.is_some()) {
                "interval = 95% forecast band".into()
            } else {
                "interval = none (this model gives no interval)".into()
            },
            "note = excess is observed minus counterfactual; these summaries are this tool's own".into(),
        ]
        .join("\n")
            + "\n"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub variable: Variable,
    pub model: String,
    pub mse: f64,
    pub split: SplitSpec,
    pub days_used: usize,
    pub daily: Vec<DailyRow>,
}

/// Held-out MSE on the 2019-01-01..2019-04-30 window after training on 2017-2018.
pub fn run_backtest(s: &TimeSeries, model: &dyn Forecaster) -> Result<BacktestResult> {
    run_backtest_with(s, &SplitSpec::backtest_2019(), model)
}

pub fn run_backtest_with(s: &TimeSeries, spec: &SplitSpec, model: &dyn Forecaster) -> Result<BacktestResult> {
    let (predict, fc) = forecast_window(s, spec, model)?;
    let (obs, pred) = paired(&predict, &fc.mean);
    if obs.is_empty() {
        return Err(Error::Window(format!(
            "no observed days between {} and {}",
            spec.predict_start, spec.predict_end
        )));
    }
    Ok(BacktestResult {
        variable: s.variable(),
        model: model.name(),
        mse: mse(&obs, &pred)?,
        split: *spec,
        days_used: obs.len(),
        daily: daily_rows(&predict, &fc),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Successful runs, lowest MSE first.
    pub ranked: Vec<BacktestResult>,
    /// (model, reason) for every run that failed, in input order.
    pub failures: Vec<(String, String)>,
}

/// Backtests every model. Failures are recorded, not fatal, unless all fail.
pub fn compare_models(s: &TimeSeries, spec: &SplitSpec, models: &[&dyn Forecaster]) -> Result<Comparison> {
    if models.is_empty() {
        return Err(Error::Config("no models to compare".into()));
    }
    let outcomes: Vec<Result<BacktestResult>> = models
        .par_iter()
        .map(|m| run_backtest_with(s, spec, *m))
        .collect();
    let mut ranked = Vec::new();
    let mut failures = Vec::new();
    for (m, outcome) in models.iter().zip(outcomes) {
        match outcome {
            Ok(r) => ranked.push(r),
            Err(e) => failures.push((m.name(), e.to_string())),
        }
    }
    if ranked.is_empty() {
        return Err(Error::AllFailed(failures));
    }
    // Stable sort keeps input order among equal MSEs.
    ranked.sort_by(|a, b| a.mse.total_cmp(&b.mse));
    Ok(Comparison { ranked, failures })
}
