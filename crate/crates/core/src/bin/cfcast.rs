use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfcast::report::{cmd_backtest, cmd_counterfactual, cmd_importance, cmd_inspect, RunConfig};
use cfcast::{Error, Result};

/// Counterfactual forecasting of daily air-pollutant series.
///
/// Settings come from an optional `key = value` config file; flags override
/// it. The seed falls back to CFCAST_SEED, then 0.
///
/// Exit codes: 0 ok, 2 config, 3 data, 4 model fit, 5 I/O.
#[derive(Parser)]
#[command(name = "cfcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calendar heatmaps per variable and year, plus weekly means.
    Inspect(Common),
    /// Pollutant importance for classifying high-AQI days.
    Importance(Common),
    /// Held-out MSE of each model on the backtest window.
    Backtest(Common),
    /// Observed minus counterfactual forecast over the prediction window.
    Counterfactual(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Input CSV with a date column and one column per pollutant.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Comma-separated variables, e.g. `no2,pm2_5,o3`.
    #[arg(long, value_name = "LIST")]
    variable: Option<String>,
    /// Comma-separated models: sarima, lstm, gbt.
    #[arg(long, value_name = "LIST")]
    model: Option<String>,
    /// First training day. Defaults to 2017-01-01.
    #[arg(long, value_name = "YYYY-MM-DD")]
    train_start: Option<String>,
    /// Last training day. Defaults to 2018-12-31 for backtest, 2019-12-31 otherwise.
    #[arg(long, value_name = "YYYY-MM-DD")]
    train_end: Option<String>,
    /// Defaults to the day after the training window.
    #[arg(long, value_name = "YYYY-MM-DD")]
    predict_start: Option<String>,
    /// Last predicted day. Defaults to 2019-04-30 for backtest, 2020-04-30 otherwise.
    #[arg(long, value_name = "YYYY-MM-DD")]
    predict_end: Option<String>,
    /// Random seed [env: CFCAST_SEED]
    #[arg(long)]
    seed: Option<String>,
    /// Output directory, created if needed. Defaults to `out`.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("variables", self.variable.clone()),
            ("models", self.model.clone()),
            ("train_start", self.train_start.clone()),
            ("train_end", self.train_end.clone()),
            ("predict_start", self.predict_start.clone()),
            ("predict_end", self.predict_end.clone()),
            ("seed", self.seed.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if let Some(p) = &self.input {
            cfg.input = Some(p.clone());
        }
        if let Some(p) = &self.out_dir {
            cfg.out_dir = p.clone();
        }
        if cfg.seed.is_none() {
            if let Ok(v) = std::env::var("CFCAST_SEED") {
                cfg.set("seed", v.trim())
                    .map_err(|e| Error::Config(format!("CFCAST_SEED: {e}")))?;
            }
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Inspect(c) => cmd_inspect(&c.resolve()?),
        Command::Importance(c) => cmd_importance(&c.resolve()?),
        Command::Backtest(c) => cmd_backtest(&c.resolve()?),
        Command::Counterfactual(c) => cmd_counterfactual(&c.resolve()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cfcast: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
