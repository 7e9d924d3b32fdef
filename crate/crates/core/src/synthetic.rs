//! Seeded generators for demos and checks.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::Result;
use crate::series::{TimeSeries, Variable};

/// `level + amplitude * sin(2 pi t / 7) + N(0, sigma^2)` for `days` days.
/// From `step_at` onward `step` is added to every value.
pub fn weekly_series(
    seed: u64,
    days: usize,
    level: f64,
    amplitude: f64,
    sigma: f64,
    step_at: Option<usize>,
    step: f64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    (0..days)
        .map(|t| {
            let wave = amplitude * (2.0 * std::f64::consts::PI * t as f64 / 7.0).sin();
            let shift = match step_at {
                Some(k) if t >= k => step,
                _ => 0.0,
            };
            level + wave + shift + rng.sample(noise)
        })
        .collect()
}

/// Zero-mean AR(1) with a 200-step burn-in.
pub fn ar1(seed: u64, n: usize, phi: f64, sigma: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    let mut x = 0.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..n + 200 {
        x = phi * x + rng.sample(noise);
        if t >= 200 {
            out.push(x);
        }
    }
    out
}

/// Daily table of the six pollutants plus an AQI column equal to PM2.5.
pub fn aqi_table(seed: u64, start: NaiveDate, days: usize) -> Result<Vec<TimeSeries>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(days); Variable::POLLUTANTS.len()];
    for _ in 0..days {
        for c in columns.iter_mut() {
            c.push(rng.random_range(5.0..300.0));
        }
    }
    let mut out = Vec::new();
    for (v, c) in Variable::POLLUTANTS.iter().zip(&columns) {
        out.push(TimeSeries::from_values(*v, start, c)?);
        if *v == Variable::Pm25 {
            out.push(TimeSeries::from_values(Variable::Aqi, start, c)?);
        }
    }
    Ok(out)
}
