//! Run configuration and the four pipeline commands behind the `cfcast` binary.
//!
//! Each command reads one CSV table, runs a pipeline stage and writes CSV
//! tables, plain-text summaries and SVG charts into the output directory.
//! Every file is written to a temporary name and renamed into place.

mod config;
pub mod svg;
mod tables;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};

use crate::boost::{aqi_influence, write_ensemble, write_importance_csv};
use crate::counterfactual::{
    run_backtest_with, run_counterfactual, write_daily_csv, CounterfactualReport, DailyRow,
};
use crate::error::{Error, Result};
use crate::series::{load_all, weekly_mean, SplitSpec, TimeSeries, Variable};

pub use config::RunConfig;
pub use tables::{parse_backtest_csv, BacktestTable};

/// Variables compared when the configuration names none.
pub const DEFAULT_COMPARISON_VARIABLES: [Variable; 3] = [Variable::No2, Variable::Pm25, Variable::O3];

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Output { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes.as_ref())?;
        self.written.push(path);
        Ok(())
    }
}

fn load_table(config: &RunConfig) -> Result<Vec<TimeSeries>> {
    let input = config
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("no input file; set input or pass --input".into()))?;
    if !input.exists() {
        return Err(Error::Config(format!("input file {} does not exist", input.display())));
    }
    load_all(input)
}

fn pick(table: &[TimeSeries], v: Variable) -> Result<&TimeSeries> {
    table
        .iter()
        .find(|s| s.variable() == v)
        .ok_or_else(|| Error::Schema(format!("missing column {}", v.column_name())))
}

fn selected<'a>(table: &'a [TimeSeries], config: &RunConfig, default: &[Variable]) -> Result<Vec<&'a TimeSeries>> {
    if config.variables.is_empty() && default.is_empty() {
        return Ok(table.iter().collect());
    }
    let wanted = if config.variables.is_empty() { default } else { &config.variables };
    wanted.iter().map(|v| pick(table, *v)).collect()
}

fn value_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

/// Weekly means of several series, one column per variable, keyed by week start.
pub fn weekly_means_csv(series: &[&TimeSeries]) -> Result<Vec<u8>> {
    let mut by_week: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    for (k, s) in series.iter().enumerate() {
        for (date, v) in weekly_mean(s) {
            by_week.entry(date).or_insert_with(|| vec![None; series.len()])[k] = v;
        }
    }
    let mut header = vec!["week_start".to_string()];
    header.extend(series.iter().map(|s| s.variable().column_name().to_string()));
    let rows: Vec<Vec<String>> = by_week
        .into_iter()
        .map(|(d, vals)| std::iter::once(d.to_string()).chain(vals.into_iter().map(value_cell)).collect())
        .collect();
    csv_bytes(&header, &rows)
}

/// Per-year calendar heatmaps for each selected variable plus the weekly
/// mean chart and its CSV.
pub fn cmd_inspect(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let table = load_table(config)?;
    let series = selected(&table, config, &[])?;
    let mut out = Output::create(&config.out_dir)?;
    for s in &series {
        let col = s.variable().column_name();
        for year in s.start().year()..=s.end().year() {
            let days: Vec<(NaiveDate, Option<f64>)> = s
                .observations()
                .filter(|o| o.date.year() == year)
                .map(|o| (o.date, (!o.missing).then_some(o.value)))
                .collect();
            let title = format!("Daily {} {year} ({})", s.variable().display_name(), s.variable().unit());
            out.write(&format!("heatmap_{col}_{year}.svg"), svg::calendar_heatmap(&title, year, &days))?;
        }
    }
    out.write("weekly_means.csv", weekly_means_csv(&series)?)?;

    let mut dates: Vec<NaiveDate> = Vec::new();
    for s in &series {
        for (d, _) in weekly_mean(s) {
            dates.push(d);
        }
    }
    dates.sort();
    dates.dedup();
    let lines: Vec<(String, Vec<Option<f64>>)> = series
        .iter()
        .map(|s| {
            let weekly: BTreeMap<NaiveDate, Option<f64>> = weekly_mean(s).into_iter().collect();
            let values = dates.iter().map(|d| weekly.get(d).copied().flatten()).collect();
            (s.variable().display_name().to_string(), values)
        })
        .collect();
    out.write("weekly_means.svg", svg::line_chart("Weekly means", "concentration", &dates, &lines))?;
    Ok(out.written)
}

/// Which pollutants best separate high-AQI days from the rest.
pub fn cmd_importance(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let table = load_table(config)?;
    let report = aqi_influence(&table, config.cutoff, config.split_fraction, &config.importance)?;
    let mut out = Output::create(&config.out_dir)?;

    let mut csv = Vec::new();
    write_importance_csv(&report.importance, &mut csv)?;
    out.write("importance.csv", csv)?;

    let bars: Vec<(String, f64)> = report.importance.iter().map(|f| (f.feature.clone(), f.gain)).collect();
    let title = format!("Influence of pollutants on AQI > {}", report.cutoff);
    out.write("importance.svg", svg::bar_chart(&title, &bars))?;

    let summary = format!(
        "cutoff = {}\nsplit_fraction = {}\nn_train = {}\nn_test = {}\naccuracy = {:.6}\nrounds = {}\nmax_depth = {}\nlearning_rate = {}\n",
        report.cutoff,
        config.split_fraction,
        report.n_train,
        report.n_test,
        report.accuracy,
        report.ensemble.config.num_rounds,
        report.ensemble.config.max_depth,
        report.ensemble.config.learning_rate,
    );
    out.write("importance_summary.txt", summary)?;

    let mut trees = Vec::new();
    write_ensemble(&report.ensemble, &mut trees).map_err(|e| Error::io(out.dir.join("importance_trees.txt"), e))?;
    out.write("importance_trees.txt", trees)?;
    Ok(out.written)
}

fn daily_csv(daily: &[DailyRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_daily_csv(daily, &mut buf)?;
    Ok(buf)
}

fn prediction_svg(title: &str, unit: &str, daily: &[DailyRow]) -> String {
    let dates: Vec<NaiveDate> = daily.iter().map(|r| r.date).collect();
    let observed: Vec<Option<f64>> = daily.iter().map(|r| r.observed).collect();
    let predicted: Vec<f64> = daily.iter().map(|r| r.predicted).collect();
    let lower: Option<Vec<f64>> = daily.iter().map(|r| r.lower95).collect();
    let upper: Option<Vec<f64>> = daily.iter().map(|r| r.upper95).collect();
    let band = match (&lower, &upper) {
        (Some(l), Some(u)) => Some((l.as_slice(), u.as_slice())),
        _ => None,
    };
    svg::prediction_chart(title, unit, &dates, &observed, &predicted, band)
}

/// Held-out MSE for every model and variable on the backtest split.
pub fn cmd_backtest(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let table = load_table(config)?;
    let series = selected(&table, config, &DEFAULT_COMPARISON_VARIABLES)?;
    let models = config.model_choices()?;
    let spec = config.split(SplitSpec::backtest_2019())?;
    let mut out = Output::create(&config.out_dir)?;

    let mut result = BacktestTable {
        variables: series.iter().map(|s| s.variable()).collect(),
        models: models.iter().map(|m| m.kind().to_string()).collect(),
        cells: Vec::new(),
    };
    for model in &models {
        let mut row = Vec::new();
        for s in &series {
            match run_backtest_with(s, &spec, model) {
                Ok(r) => {
                    let stem = format!("backtest_{}_{}", s.variable().column_name(), model.kind());
                    let title = format!(
                        "{} backtest, {} (MSE {:.2})",
                        s.variable().display_name(),
                        model.kind(),
                        r.mse
                    );
                    out.write(&format!("{stem}.csv"), daily_csv(&r.daily)?)?;
                    out.write(&format!("{stem}.svg"), prediction_svg(&title, s.variable().unit(), &r.daily))?;
                    row.push(Ok(r.mse));
                }
                Err(e) => row.push(Err(e.to_string())),
            }
        }
        result.cells.push(row);
    }
    if result.cells.iter().flatten().all(|c| c.is_err()) {
        let failures = result
            .models
            .iter()
            .zip(&result.cells)
            .flat_map(|(m, row)| {
                result.variables.iter().zip(row).filter_map(move |(v, c)| {
                    c.as_ref().err().map(|e| (format!("{m}/{}", v.column_name()), e.clone()))
                })
            })
            .collect();
        return Err(Error::AllFailed(failures));
    }
    out.write("backtest_mse.csv", result.to_csv()?)?;
    out.write("backtest_mse.txt", result.to_text())?;
    Ok(out.written)
}

/// Daily CSV, prediction chart, monthly box plot and summary for one run.
pub fn write_counterfactual_outputs(report: &CounterfactualReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Output::create(dir)?;
    let stem = format!("cf_{}_{}", report.variable.column_name(), report.model);
    let name = report.variable.display_name();
    let unit = report.variable.unit();
    out.write(&format!("{stem}.csv"), daily_csv(&report.daily)?)?;
    let title = format!("{name}: observed vs counterfactual ({})", report.model);
    out.write(&format!("{stem}.svg"), prediction_svg(&title, unit, &report.daily))?;
    let dates: Vec<NaiveDate> = report.daily.iter().map(|r| r.date).collect();
    let observed: Vec<Option<f64>> = report.daily.iter().map(|r| r.observed).collect();
    let predicted: Vec<f64> = report.daily.iter().map(|r| r.predicted).collect();
    let title = format!("{name}: monthly observed vs counterfactual ({})", report.model);
    out.write(
        &format!("{stem}_monthly.svg"),
        svg::monthly_boxplot(&title, unit, &dates, &observed, &predicted),
    )?;
    out.write(&format!("{stem}_summary.txt"), report.summary_text())?;
    Ok(out.written)
}

/// Counterfactual runs for every selected variable and model.
pub fn cmd_counterfactual(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let table = load_table(config)?;
    let series = selected(&table, config, &DEFAULT_COMPARISON_VARIABLES)?;
    let models = config.model_choices()?;
    let spec = config.split(SplitSpec::counterfactual_2020())?;
    let mut written = Vec::new();
    for s in &series {
        for model in &models {
            let report = run_counterfactual(s, &spec, model)?;
            written.extend(write_counterfactual_outputs(&report, &config.out_dir)?);
        }
    }
    Ok(written)
}
