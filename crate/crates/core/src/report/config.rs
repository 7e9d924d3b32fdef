use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::boost::{BoostConfig, GbtForecastConfig, Loss};
use crate::counterfactual::ModelChoice;
use crate::error::{Error, Result};
use crate::lstm::LstmConfig;
use crate::sarima::SarimaGrid;
use crate::series::{parse_date, SplitSpec, Variable};

/// Flat `key = value` run configuration.
///
/// ```text
/// # comments and blank lines are ignored
/// input = data/wuhan.csv
/// variables = no2, pm2_5, o3
/// models = sarima, lstm, gbt
/// train_start = 2017-01-01
/// train_end = 2019-12-31
/// predict_start = 2020-01-01
/// predict_end = 2020-04-30
/// period = 7
/// seed = 0
/// out_dir = out
/// importance.cutoff = 150
/// importance.split_fraction = 0.8
/// importance.rounds = 200
/// importance.max_depth = 4
/// importance.learning_rate = 0.3
/// model.sarima.max_p = 2
/// model.sarima.max_d = 1
/// model.sarima.max_q = 2
/// model.sarima.max_seasonal_p = 1
/// model.sarima.max_seasonal_d = 1
/// model.sarima.max_seasonal_q = 1
/// model.sarima.max_order = 5
/// model.lstm.hidden_size = 32
/// model.lstm.window = 14
/// model.lstm.epochs = 200
/// model.lstm.learning_rate = 0.05
/// model.lstm.batch_size = 32
/// model.lstm.clip_norm = 5
/// model.gbt.rounds = 200
/// model.gbt.max_depth = 4
/// model.gbt.learning_rate = 0.3
/// model.gbt.lambda = 1
/// model.gbt.gamma = 0
/// model.gbt.min_child_weight = 1
/// model.gbt.lags = 1, 2, 3, 7, 14
/// model.gbt.calendar = true
/// ```
///
/// Split dates left unset fall back to the command's standard window; an
/// unset `predict_start` is the day after `train_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    /// Empty means the command's default selection.
    pub variables: Vec<Variable>,
    pub models: Vec<String>,
    pub train_start: Option<NaiveDate>,
    pub train_end: Option<NaiveDate>,
    pub predict_start: Option<NaiveDate>,
    pub predict_end: Option<NaiveDate>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub cutoff: f64,
    pub split_fraction: f64,
    pub importance: BoostConfig,
    pub sarima: SarimaGrid,
    pub lstm: LstmConfig,
    pub gbt: GbtForecastConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            variables: Vec::new(),
            models: vec!["sarima".into(), "lstm".into(), "gbt".into()],
            train_start: None,
            train_end: None,
            predict_start: None,
            predict_end: None,
            seed: None,
            out_dir: PathBuf::from("out"),
            cutoff: 150.0,
            split_fraction: 0.8,
            importance: BoostConfig { loss: Loss::Logistic, ..BoostConfig::default() },
            sarima: SarimaGrid::default(),
            lstm: LstmConfig::default(),
            gbt: GbtForecastConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies every `key = value` line in `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Sets one key; command-line flags go through here too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let date = |v: &str| parse_date(v).map_err(|e| Error::Config(format!("{key}: {e}")));
        let range = |v: &str| -> Result<std::ops::RangeInclusive<usize>> { Ok(0..=parse::<usize>(key, v)?) };
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "variables" | "variable" => {
                self.variables = list(value).map(|v| parse::<Variable>(key, v)).collect::<Result<_>>()?
            }
            "models" | "model" => {
                self.models = list(value).map(|m| m.to_ascii_lowercase()).collect();
                for m in &self.models {
                    ModelChoice::from_kind(m)?;
                }
            }
            "train_start" => self.train_start = Some(date(value)?),
            "train_end" => self.train_end = Some(date(value)?),
            "predict_start" => self.predict_start = Some(date(value)?),
            "predict_end" => self.predict_end = Some(date(value)?),
            "period" => self.sarima.period = parse(key, value)?,
            "seed" => self.seed = Some(parse(key, value)?),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "importance.cutoff" => self.cutoff = parse(key, value)?,
            "importance.split_fraction" => self.split_fraction = parse(key, value)?,
            "importance.rounds" => self.importance.num_rounds = parse(key, value)?,
            "importance.max_depth" => self.importance.max_depth = parse(key, value)?,
            "importance.learning_rate" => self.importance.learning_rate = parse(key, value)?,
            "model.sarima.max_p" => self.sarima.p = range(value)?,
            "model.sarima.max_d" => self.sarima.d = range(value)?,
            "model.sarima.max_q" => self.sarima.q = range(value)?,
            "model.sarima.max_seasonal_p" => self.sarima.seasonal_p = range(value)?,
            "model.sarima.max_seasonal_d" => self.sarima.seasonal_d = range(value)?,
            "model.sarima.max_seasonal_q" => self.sarima.seasonal_q = range(value)?,
            "model.sarima.max_order" => self.sarima.max_order = parse(key, value)?,
            "model.lstm.hidden_size" => self.lstm.hidden_size = parse(key, value)?,
            "model.lstm.window" => self.lstm.window = parse(key, value)?,
            "model.lstm.epochs" => self.lstm.epochs = parse(key, value)?,
            "model.lstm.learning_rate" => self.lstm.learning_rate = parse(key, value)?,
            "model.lstm.batch_size" => self.lstm.batch_size = parse(key, value)?,
            "model.lstm.clip_norm" => self.lstm.clip_norm = parse(key, value)?,
            "model.gbt.rounds" => self.gbt.boost.num_rounds = parse(key, value)?,
            "model.gbt.max_depth" => self.gbt.boost.max_depth = parse(key, value)?,
            "model.gbt.learning_rate" => self.gbt.boost.learning_rate = parse(key, value)?,
            "model.gbt.lambda" => self.gbt.boost.lambda = parse(key, value)?,
            "model.gbt.gamma" => self.gbt.boost.gamma = parse(key, value)?,
            "model.gbt.min_child_weight" => self.gbt.boost.min_child_weight = parse(key, value)?,
            "model.gbt.lags" => self.gbt.lags = list(value).map(|l| parse(key, l)).collect::<Result<_>>()?,
            "model.gbt.calendar" => self.gbt.calendar = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// The configured split, with unset dates taken from `default`.
    pub fn split(&self, default: SplitSpec) -> Result<SplitSpec> {
        let train_start = self.train_start.unwrap_or(default.train_start);
        let train_end = self.train_end.unwrap_or(default.train_end);
        let predict_start = self
            .predict_start
            .unwrap_or_else(|| train_end.succ_opt().expect("date in range"));
        SplitSpec::new(train_start, train_end, predict_start, self.predict_end.unwrap_or(default.predict_end))
    }

    pub fn model_choices(&self) -> Result<Vec<ModelChoice>> {
        let seed = self.seed.unwrap_or(0);
        self.models
            .iter()
            .map(|kind| {
                Ok(match ModelChoice::from_kind(kind)? {
                    ModelChoice::Sarima(_) => ModelChoice::Sarima(self.sarima.clone()),
                    ModelChoice::Lstm(_) => ModelChoice::Lstm(LstmConfig { seed, ..self.lstm.clone() }),
                    ModelChoice::Gbt(_) => ModelChoice::Gbt(self.gbt.clone()),
                })
            })
            .collect()
    }
}
