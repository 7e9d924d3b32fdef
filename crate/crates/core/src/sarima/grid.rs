use std::cmp::Ordering;
use std::ops::RangeInclusive;

use rayon::prelude::*;

use super::{fit_values, SarimaFit, SarimaSpec, DEFAULT_MAX_ORDER};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Candidate orders for [`grid_search`]. The seasonal period is fixed per run.
#[derive(Debug, Clone, PartialEq)]
pub struct SarimaGrid {
    pub p: RangeInclusive<usize>,
    pub d: RangeInclusive<usize>,
    pub q: RangeInclusive<usize>,
    pub seasonal_p: RangeInclusive<usize>,
    pub seasonal_d: RangeInclusive<usize>,
    pub seasonal_q: RangeInclusive<usize>,
    pub period: usize,
    /// Candidates with `p + q + P + Q` above this are skipped.
    pub max_order: usize,
    /// `None` includes a constant exactly when the candidate is undifferenced.
    pub include_constant: Option<bool>,
}

impl Default for SarimaGrid {
    fn default() -> Self {
        Self::with_period(7)
    }
}

impl SarimaGrid {
    pub fn with_period(period: usize) -> Self {
        Self {
            p: 0..=2,
            d: 0..=1,
            q: 0..=2,
            seasonal_p: 0..=1,
            seasonal_d: 0..=1,
            seasonal_q: 0..=1,
            period,
            max_order: DEFAULT_MAX_ORDER,
            include_constant: None,
        }
    }

    /// A grid containing exactly `spec`.
    pub fn single(spec: SarimaSpec) -> Self {
        Self {
            p: spec.p..=spec.p,
            d: spec.d..=spec.d,
            q: spec.q..=spec.q,
            seasonal_p: spec.seasonal_p..=spec.seasonal_p,
            seasonal_d: spec.seasonal_d..=spec.seasonal_d,
            seasonal_q: spec.seasonal_q..=spec.seasonal_q,
            period: spec.period,
            max_order: spec.arma_order(),
            include_constant: Some(spec.include_constant),
        }
    }

    pub fn candidates(&self) -> Vec<SarimaSpec> {
        let mut out = Vec::new();
        let seasonal_possible = self.period >= 2;
        for p in self.p.clone() {
            for d in self.d.clone() {
                for q in self.q.clone() {
                    for sp in self.seasonal_p.clone() {
                        for sd in self.seasonal_d.clone() {
                            for sq in self.seasonal_q.clone() {
                                if !seasonal_possible && sp + sd + sq > 0 {
                                    continue;
                                }
                                let spec = SarimaSpec {
                                    p,
                                    d,
                                    q,
                                    seasonal_p: sp,
                                    seasonal_d: sd,
                                    seasonal_q: sq,
                                    period: self.period,
                                    include_constant: self
                                        .include_constant
                                        .unwrap_or(d + sd == 0),
                                };
                                if spec.validate(self.max_order).is_ok() {
                                    out.push(spec);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GridEntry {
    pub spec: SarimaSpec,
    /// The fit, or the reason the candidate failed.
    pub outcome: std::result::Result<SarimaFit, String>,
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    pub best: SarimaFit,
    /// Every candidate in grid order.
    pub table: Vec<GridEntry>,
}

/// Lower AIC wins; ties go to fewer parameters, then to lexicographically
/// smaller `(p, q, P, Q, d, D)`.
fn preference(a: &SarimaFit, b: &SarimaFit) -> Ordering {
    let key = |s: &SarimaSpec| (s.p, s.q, s.seasonal_p, s.seasonal_q, s.d, s.seasonal_d);
    a.aic
        .total_cmp(&b.aic)
        .then(a.spec.num_params().cmp(&b.spec.num_params()))
        .then(key(&a.spec).cmp(&key(&b.spec)))
}

/// Fits every candidate of `grid` (in parallel) and returns the minimum-AIC fit.
pub fn grid_search(series: &TimeSeries, grid: &SarimaGrid) -> Result<GridSearch> {
    grid_search_values(&series.complete_values()?, grid)
}

pub fn grid_search_values(y: &[f64], grid: &SarimaGrid) -> Result<GridSearch> {
    let candidates = grid.candidates();
    if candidates.is_empty() {
        return Err(Error::Config("SARIMA grid has no valid candidates".into()));
    }
    let table: Vec<GridEntry> = candidates
        .par_iter()
        .map(|spec| GridEntry {
            spec: *spec,
            outcome: fit_values(spec, y).map_err(|e| e.to_string()),
        })
        .collect();
    let best = table
        .iter()
        .filter_map(|e| e.outcome.as_ref().ok())
        .min_by(|a, b| preference(a, b))
        .cloned();
    match best {
        Some(best) => Ok(GridSearch { best, table }),
        None => Err(Error::AllFailed(
            table
                .into_iter()
                .map(|e| (e.spec.to_string(), e.outcome.unwrap_err()))
                .collect(),
        )),
    }
}
