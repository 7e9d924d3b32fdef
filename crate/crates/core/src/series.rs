//! Daily pollutant series: loading, gap handling, resampling, splitting, and
//! the differencing primitives shared by every model.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Days, NaiveDate};

use crate::error::{Error, Result};

/// Default longest gap (in days) filled by linear interpolation before fitting.
pub const DEFAULT_MAX_GAP: usize = 3;

/// The measured quantities in a city-daily air-quality record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    Aqi,
    So2,
    No2,
    Co,
    O3,
    Pm10,
    Pm25,
}

impl Variable {
    pub const ALL: [Variable; 7] = [
        Variable::Aqi,
        Variable::So2,
        Variable::No2,
        Variable::Co,
        Variable::O3,
        Variable::Pm10,
        Variable::Pm25,
    ];

    /// The six pollutants, in the order they appear in the daily record.
    pub const POLLUTANTS: [Variable; 6] = [
        Variable::So2,
        Variable::No2,
        Variable::Co,
        Variable::O3,
        Variable::Pm10,
        Variable::Pm25,
    ];

    /// Canonical lower-case column name.
    pub fn column_name(self) -> &'static str {
        match self {
            Variable::Aqi => "aqi",
            Variable::So2 => "so2",
            Variable::No2 => "no2",
            Variable::Co => "co",
            Variable::O3 => "o3",
            Variable::Pm10 => "pm10",
            Variable::Pm25 => "pm2_5",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Variable::Aqi => "AQI",
            Variable::So2 => "SO2",
            Variable::No2 => "NO2",
            Variable::Co => "CO",
            Variable::O3 => "O3",
            Variable::Pm10 => "PM10",
            Variable::Pm25 => "PM2.5",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Variable::Aqi => "",
            Variable::Co => "mg/m3",
            _ => "ug/m3",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column_name())
    }
}

impl FromStr for Variable {
    type Err = Error;

    /// Case-insensitive; accepts `pm2.5`, `pm2_5` and `pm25` for fine particulates.
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['.', '-'], "_");
        let v = match key.as_str() {
            "aqi" => Variable::Aqi,
            "so2" => Variable::So2,
            "no2" => Variable::No2,
            "co" => Variable::Co,
            "o3" => Variable::O3,
            "pm10" => Variable::Pm10,
            "pm2_5" | "pm25" => Variable::Pm25,
            _ => return Err(Error::Schema(format!("unknown variable {s:?}"))),
        };
        Ok(v)
    }
}

/// One day of one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub date: NaiveDate,
    pub value: f64,
    pub missing: bool,
}

/// A gap-free daily index with per-day optional values.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    variable: Variable,
    start: NaiveDate,
    values: Vec<Option<f64>>,
}

impl TimeSeries {
    /// Builds a series from consecutive daily values starting at `start`.
    ///
    /// Present values must be finite and non-negative.
    pub fn new(variable: Variable, start: NaiveDate, values: Vec<Option<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Length("a series needs at least one day".into()));
        }
        for (i, v) in values.iter().enumerate() {
            if let Some(x) = v {
                if !x.is_finite() || *x < 0.0 {
                    return Err(Error::Parse(format!(
                        "{variable} on {}: value {x} must be finite and non-negative",
                        add_days(start, i)
                    )));
                }
            }
        }
        Ok(Self {
            variable,
            start,
            values,
        })
    }

    /// Fully observed series from plain values.
    pub fn from_values(variable: Variable, start: NaiveDate, values: &[f64]) -> Result<Self> {
        Self::new(variable, start, values.iter().copied().map(Some).collect())
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    /// Last date covered.
    pub fn end(&self) -> NaiveDate {
        add_days(self.start, self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        add_days(self.start, index)
    }

    /// Position of `date`, if it falls inside the series.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        (offset >= 0 && (offset as usize) < self.values.len()).then_some(offset as usize)
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        self.values.iter().enumerate().map(|(i, v)| Observation {
            date: self.date_at(i),
            value: v.unwrap_or(f64::NAN),
            missing: v.is_none(),
        })
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// All values, failing on the first missing run.
    pub fn complete_values(&self) -> Result<Vec<f64>> {
        if let Some(gap) = find_gaps(&self.values).into_iter().next() {
            return Err(Error::Gap {
                start: self.date_at(gap.0),
                length: gap.1,
            });
        }
        Ok(self.values.iter().map(|v| v.unwrap()).collect())
    }

    /// Inclusive date-range sub-series.
    pub fn slice(&self, from: NaiveDate, to: NaiveDate) -> Result<TimeSeries> {
        let (Some(a), Some(b)) = (self.index_of(from), self.index_of(to)) else {
            return Err(Error::Range(format!(
                "{from}..={to} is outside the series range {}..={}",
                self.start,
                self.end()
            )));
        };
        if a > b {
            return Err(Error::Range(format!("empty range {from}..={to}")));
        }
        Ok(TimeSeries {
            variable: self.variable,
            start: from,
            values: self.values[a..=b].to_vec(),
        })
    }

    /// Same dates, every present value mapped through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<TimeSeries> {
        TimeSeries::new(
            self.variable,
            self.start,
            self.values.iter().map(|v| v.map(&f)).collect(),
        )
    }
}

pub(crate) fn add_days(date: NaiveDate, days: usize) -> NaiveDate {
    date.checked_add_days(Days::new(days as u64))
        .expect("date arithmetic overflow")
}

/// Runs of missing values as (start index, length).
fn find_gaps(values: &[Option<f64>]) -> Vec<(usize, usize)> {
    let mut gaps = Vec::new();
    let mut i = 0;
    while i < values.len() {
        if values[i].is_none() {
            let start = i;
            while i < values.len() && values[i].is_none() {
                i += 1;
            }
            gaps.push((start, i - start));
        } else {
            i += 1;
        }
    }
    gaps
}

/// Train and predict windows. `predict_start` is always the day after `train_end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub predict_start: NaiveDate,
    pub predict_end: NaiveDate,
}

impl SplitSpec {
    pub fn new(
        train_start: NaiveDate,
        train_end: NaiveDate,
        predict_start: NaiveDate,
        predict_end: NaiveDate,
    ) -> Result<Self> {
        if train_start >= train_end {
            return Err(Error::Config(format!(
                "train start {train_start} must precede train end {train_end}"
            )));
        }
        if predict_start != add_days(train_end, 1) {
            return Err(Error::Config(format!(
                "predict start {predict_start} must be the day after train end {train_end}"
            )));
        }
        if predict_end < predict_start {
            return Err(Error::Config(format!(
                "predict end {predict_end} precedes predict start {predict_start}"
            )));
        }
        Ok(Self {
            train_start,
            train_end,
            predict_start,
            predict_end,
        })
    }

    /// Train on `train_start..=train_end`, predict the following `horizon` days.
    pub fn with_horizon(train_start: NaiveDate, train_end: NaiveDate, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least one day".into()));
        }
        let predict_start = add_days(train_end, 1);
        Self::new(
            train_start,
            train_end,
            predict_start,
            add_days(predict_start, horizon - 1),
        )
    }

    /// 2017-01-01..2019-12-31 history, 2020-01-01..2020-04-30 counterfactual window.
    pub fn counterfactual_2020() -> Self {
        Self::new(ymd(2017, 1, 1), ymd(2019, 12, 31), ymd(2020, 1, 1), ymd(2020, 4, 30)).unwrap()
    }

    /// Pre-pandemic assessment: 2017-01-01..2018-12-31 history, 2019-01-01..2019-04-30 holdout.
    pub fn backtest_2019() -> Self {
        Self::new(ymd(2017, 1, 1), ymd(2018, 12, 31), ymd(2019, 1, 1), ymd(2019, 4, 30)).unwrap()
    }

    pub fn train_len(&self) -> usize {
        (self.train_end - self.train_start).num_days() as usize + 1
    }

    pub fn horizon(&self) -> usize {
        (self.predict_end - self.predict_start).num_days() as usize + 1
    }
}

/// Calendar date; panics on an invalid one.
pub fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

/// Parses an ISO-8601 calendar date.
pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::Parse(format!("bad date {s:?}: {e}")))
}

/// Splits `s` into disjoint train and predict series at the `spec` boundaries.
pub fn split(s: &TimeSeries, spec: &SplitSpec) -> Result<(TimeSeries, TimeSeries)> {
    if spec.train_start < s.start() || spec.predict_end > s.end() {
        return Err(Error::Range(format!(
            "split {}..={} does not fit inside series {}..={}",
            spec.train_start,
            spec.predict_end,
            s.start(),
            s.end()
        )));
    }
    Ok((
        s.slice(spec.train_start, spec.train_end)?,
        s.slice(spec.predict_start, spec.predict_end)?,
    ))
}

/// Result of gap filling: the new series plus every run left unfilled.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolated {
    pub series: TimeSeries,
    /// (first missing date, length in days)
    pub unfilled: Vec<(NaiveDate, usize)>,
}

/// Linearly fills interior gaps of at most `max_gap` days.
///
/// Longer gaps, and gaps touching either end of the series, stay missing and
/// are listed in [`Interpolated::unfilled`].
pub fn interpolate_missing(s: &TimeSeries, max_gap: usize) -> Interpolated {
    let mut values = s.values.clone();
    let mut unfilled = Vec::new();
    for (start, len) in find_gaps(&s.values) {
        let end = start + len;
        let bounded = start > 0 && end < values.len();
        if bounded && len <= max_gap {
            let left = values[start - 1].unwrap();
            let right = values[end].unwrap();
            let step = (right - left) / (len + 1) as f64;
            for k in 0..len {
                values[start + k] = Some(left + step * (k + 1) as f64);
            }
        } else {
            unfilled.push((s.date_at(start), len));
        }
    }
    Interpolated {
        series: TimeSeries {
            variable: s.variable,
            start: s.start,
            values,
        },
        unfilled,
    }
}

/// Interpolates short gaps and demands the result be fully observed.
pub fn fill_for_fitting(s: &TimeSeries, max_gap: usize) -> Result<Vec<f64>> {
    let filled = interpolate_missing(s, max_gap);
    if let Some(&(start, length)) = filled.unfilled.first() {
        return Err(Error::Gap { start, length });
    }
    filled.series.complete_values()
}

/// Means over consecutive 7-day blocks anchored at the first date.
///
/// A block with no present value yields `None`; a trailing partial block is
/// averaged over the days it has.
pub fn weekly_mean(s: &TimeSeries) -> Vec<(NaiveDate, Option<f64>)> {
    s.values
        .chunks(7)
        .enumerate()
        .map(|(w, block)| {
            let present: Vec<f64> = block.iter().flatten().copied().collect();
            let mean = (!present.is_empty())
                .then(|| present.iter().sum::<f64>() / present.len() as f64);
            (s.date_at(7 * w), mean)
        })
        .collect()
}

/// Applies `(1 - B)^d (1 - B^s)^D` to `x`.
pub fn difference(x: &[f64], d: usize, seasonal_d: usize, s: usize) -> Result<Vec<f64>> {
    if s == 0 {
        return Err(Error::Length("seasonal period must be at least 1".into()));
    }
    let lost = d + seasonal_d * s;
    if x.len() <= lost {
        return Err(Error::Length(format!(
            "differencing needs more than {lost} values, got {}",
            x.len()
        )));
    }
    let mut out = x.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    for _ in 0..seasonal_d {
        out = (s..out.len()).map(|t| out[t] - out[t - s]).collect();
    }
    Ok(out)
}

/// Coefficients `c` of `(1 - B)^d (1 - B^s)^D = 1 - sum_j c[j] B^j` (index 0 unused).
pub fn differencing_polynomial(d: usize, seasonal_d: usize, s: usize) -> Vec<f64> {
    // Full polynomial with the leading 1, then flip the sign convention.
    let mut poly = vec![1.0];
    let mut mul = |factor: &[f64]| {
        let mut next = vec![0.0; poly.len() + factor.len() - 1];
        for (i, a) in poly.iter().enumerate() {
            for (j, b) in factor.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        poly = next;
    };
    for _ in 0..d {
        mul(&[1.0, -1.0]);
    }
    let mut seasonal = vec![0.0; s + 1];
    seasonal[0] = 1.0;
    seasonal[s] = -1.0;
    for _ in 0..seasonal_d {
        mul(&seasonal);
    }
    let mut c: Vec<f64> = poly.iter().map(|v| -v).collect();
    c[0] = 0.0;
    c
}

/// Inverts [`difference`] given the first `d + D*s` original values.
pub fn integrate(
    diffed: &[f64],
    head: &[f64],
    d: usize,
    seasonal_d: usize,
    s: usize,
) -> Result<Vec<f64>> {
    let lost = d + seasonal_d * s;
    if head.len() != lost {
        return Err(Error::Length(format!(
            "integration needs exactly {lost} head values, got {}",
            head.len()
        )));
    }
    // Undo one difference at a time, in reverse order. Each stage needs the
    // leading values of its input, which are differences of `head`.
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(d + seasonal_d);
    let mut partial = head.to_vec();
    for _ in 0..d {
        stages.push(partial[..1].to_vec());
        partial = partial.windows(2).map(|w| w[1] - w[0]).collect();
    }
    for _ in 0..seasonal_d {
        stages.push(partial[..s].to_vec());
        partial = (s..partial.len()).map(|t| partial[t] - partial[t - s]).collect();
    }
    let mut out = diffed.to_vec();
    for lead in stages.into_iter().rev() {
        let mut next = lead;
        next.reserve(out.len());
        for (k, w) in out.iter().enumerate() {
            let v = w + next[k];
            next.push(v);
        }
        out = next;
    }
    Ok(out)
}

/// Loads one variable from a daily CSV file.
///
/// The header must contain `date` (YYYY-MM-DD) and the variable's column
/// (matched case-insensitively; `PM2.5` and `pm2_5` both work). Dates absent
/// from the file become missing days; empty cells are missing.
pub fn load_csv(path: impl AsRef<Path>, variable: Variable) -> Result<TimeSeries> {
    let mut all = read_table(path.as_ref(), &[variable])?;
    Ok(all.remove(0))
}

/// Loads every recognised variable column in the file, on a shared date index.
pub fn load_all(path: impl AsRef<Path>) -> Result<Vec<TimeSeries>> {
    read_table(path.as_ref(), &[])
}

fn read_table(path: &Path, wanted: &[Variable]) -> Result<Vec<TimeSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();

    let date_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("date"))
        .ok_or_else(|| Error::Schema(format!("{}: no \"date\" column", path.display())))?;
    let mut found: Vec<(Variable, usize)> = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if let Ok(v) = h.parse::<Variable>() {
            if found.iter().any(|(seen, _)| *seen == v) {
                return Err(Error::Schema(format!("column for {v} appears twice")));
            }
            found.push((v, i));
        }
    }
    let columns: Vec<(Variable, usize)> = if wanted.is_empty() {
        if found.is_empty() {
            return Err(Error::Schema(format!(
                "{}: no pollutant columns in header",
                path.display()
            )));
        }
        found
    } else {
        wanted
            .iter()
            .map(|w| {
                found
                    .iter()
                    .find(|(v, _)| v == w)
                    .copied()
                    .ok_or_else(|| {
                        Error::Schema(format!("{}: missing column {w}", path.display()))
                    })
            })
            .collect::<Result<_>>()?
    };

    let mut rows: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let raw_date = record.get(date_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| Error::Row {
            line,
            message: format!("unparseable date {raw_date:?}"),
        })?;
        let mut values = Vec::with_capacity(columns.len());
        for &(v, col) in &columns {
            let cell = record.get(col).unwrap_or("");
            if cell.is_empty() {
                values.push(None);
                continue;
            }
            let x: f64 = cell.parse().map_err(|_| Error::Row {
                line,
                message: format!("unparseable {v} value {cell:?}"),
            })?;
            if !x.is_finite() || x < 0.0 {
                return Err(Error::Row {
                    line,
                    message: format!("{v} value {x} must be finite and non-negative"),
                });
            }
            values.push(Some(x));
        }
        if rows.insert(date, values).is_some() {
            return Err(Error::DuplicateDate { line, date });
        }
    }

    let (Some(&first), Some(&last)) = (rows.keys().next(), rows.keys().next_back()) else {
        return Err(Error::Length(format!("{}: no data rows", path.display())));
    };
    let days = (last - first).num_days() as usize + 1;
    let mut out = Vec::with_capacity(columns.len());
    for (k, &(variable, _)) in columns.iter().enumerate() {
        let values: Vec<Option<f64>> = (0..days)
            .map(|i| rows.get(&add_days(first, i)).and_then(|r| r[k]))
            .collect();
        if values.iter().flatten().count() < 2 {
            return Err(Error::Length(format!(
                "{variable} has fewer than two observed days"
            )));
        }
        out.push(TimeSeries::new(variable, first, values)?);
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Row {
            line,
            message: format!("{other:?}"),
        },
    }
}
