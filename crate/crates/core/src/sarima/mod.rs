//! Seasonal ARIMA estimated by conditional sum of squares.
//!
//! The model on the differenced series `w_t = (1-B)^d (1-B^s)^D y_t` is
//!
//! ```text
//! phi(B) PHI(B^s) (w_t - mu) = theta(B) THETA(B^s) e_t
//! ```
//!
//! with `phi(B) = 1 - sum phi_j B^j` and `theta(B) = 1 + sum theta_j B^j`
//! (same conventions for the seasonal polynomials). `mu` is the optional
//! constant, expressed as the mean of the differenced series. Pre-sample
//! deviations and errors are taken as zero.

mod grid;
pub mod transform;

use std::f64::consts::PI;
use std::fmt;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::series::{add_days, difference, differencing_polynomial, integrate, TimeSeries};

pub use grid::{grid_search, grid_search_values, GridEntry, GridSearch, SarimaGrid};

/// Default cap on `p + q + P + Q`.
pub const DEFAULT_MAX_ORDER: usize = 5;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SarimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_d: usize,
    pub seasonal_q: usize,
    pub period: usize,
    pub include_constant: bool,
}

impl SarimaSpec {
    /// Non-seasonal ARIMA(p, d, q).
    pub fn arima(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            seasonal_p: 0,
            seasonal_d: 0,
            seasonal_q: 0,
            period: 1,
            include_constant: false,
        }
    }

    pub fn seasonal(mut self, p: usize, d: usize, q: usize, period: usize) -> Self {
        self.seasonal_p = p;
        self.seasonal_d = d;
        self.seasonal_q = q;
        self.period = period;
        self
    }

    pub fn with_constant(mut self, include: bool) -> Self {
        self.include_constant = include;
        self
    }

    pub fn arma_order(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    /// Estimated parameter count, including the innovation variance.
    pub fn num_params(&self) -> usize {
        self.arma_order() + usize::from(self.include_constant) + 1
    }

    /// Observations lost to differencing.
    pub fn lost_to_differencing(&self) -> usize {
        self.d + self.seasonal_d * self.period
    }

    pub fn validate(&self, max_order: usize) -> Result<()> {
        if self.period == 0 {
            return Err(Error::Config("seasonal period must be at least 1".into()));
        }
        let seasonal = self.seasonal_p + self.seasonal_d + self.seasonal_q > 0;
        if seasonal && self.period < 2 {
            return Err(Error::Config(format!(
                "{self}: seasonal terms need a period of at least 2"
            )));
        }
        if self.arma_order() > max_order {
            return Err(Error::Config(format!(
                "{self}: p+q+P+Q = {} exceeds the maximum {max_order}",
                self.arma_order()
            )));
        }
        Ok(())
    }

    fn packed_len(&self) -> usize {
        self.arma_order() + usize::from(self.include_constant)
    }
}

impl fmt::Display for SarimaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SARIMA({},{},{})({},{},{})[{}]{}",
            self.p,
            self.d,
            self.q,
            self.seasonal_p,
            self.seasonal_d,
            self.seasonal_q,
            self.period,
            if self.include_constant { "+c" } else { "" }
        )
    }
}

/// Model coefficients in constrained (stationary/invertible) space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coefficients {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sar: Vec<f64>,
    pub sma: Vec<f64>,
    pub constant: f64,
}

impl Coefficients {
    /// Unpacks optimizer coordinates `(ar, ma, sar, sma, constant)`.
    pub fn from_unconstrained(spec: &SarimaSpec, params: &[f64]) -> Result<Self> {
        if params.len() != spec.packed_len() {
            return Err(Error::Length(format!(
                "{spec} packs {} parameters, got {}",
                spec.packed_len(),
                params.len()
            )));
        }
        let (ar, rest) = params.split_at(spec.p);
        let (ma, rest) = rest.split_at(spec.q);
        let (sar, rest) = rest.split_at(spec.seasonal_p);
        let (sma, rest) = rest.split_at(spec.seasonal_q);
        let invertible = |u: &[f64]| -> Vec<f64> {
            transform::to_stationary(u).into_iter().map(|c| -c).collect()
        };
        Ok(Self {
            ar: transform::to_stationary(ar),
            ma: invertible(ma),
            sar: transform::to_stationary(sar),
            sma: invertible(sma),
            constant: rest.first().copied().unwrap_or(0.0),
        })
    }

    /// Inverse of [`Coefficients::from_unconstrained`]; `None` outside the valid region.
    pub fn to_unconstrained(&self, spec: &SarimaSpec) -> Option<Vec<f64>> {
        let negated = |c: &[f64]| c.iter().map(|v| -v).collect::<Vec<_>>();
        let mut out = transform::from_stationary(&self.ar)?;
        out.extend(transform::from_stationary(&negated(&self.ma))?);
        out.extend(transform::from_stationary(&self.sar)?);
        out.extend(transform::from_stationary(&negated(&self.sma))?);
        if spec.include_constant {
            out.push(self.constant);
        }
        Some(out)
    }

    /// `a` with `phi(B) PHI(B^s) = 1 - sum a_j B^j` (index 0 unused).
    fn ar_polynomial(&self, period: usize) -> Vec<f64> {
        let full = multiply(&lag_poly(&self.ar, 1, -1.0), &lag_poly(&self.sar, period, -1.0));
        full.iter().enumerate().map(|(j, v)| if j == 0 { 0.0 } else { -v }).collect()
    }

    /// `b` with `theta(B) THETA(B^s) = 1 + sum b_j B^j` (index 0 unused).
    fn ma_polynomial(&self, period: usize) -> Vec<f64> {
        let mut full = multiply(&lag_poly(&self.ma, 1, 1.0), &lag_poly(&self.sma, period, 1.0));
        full[0] = 0.0;
        full
    }
}

/// Full polynomial `1 + sign * sum c_j B^{j*step}`.
fn lag_poly(c: &[f64], step: usize, sign: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len() * step + 1];
    out[0] = 1.0;
    for (j, v) in c.iter().enumerate() {
        out[(j + 1) * step] = sign * v;
    }
    out
}

fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// One-step errors of the recursion with zero pre-sample deviations and errors.
pub fn css_residuals(spec: &SarimaSpec, coef: &Coefficients, w: &[f64]) -> Vec<f64> {
    let a = coef.ar_polynomial(spec.period);
    let b = coef.ma_polynomial(spec.period);
    let mu = coef.constant;
    let mut errors = Vec::with_capacity(w.len());
    for t in 0..w.len() {
        let mut e = w[t] - mu;
        for j in 1..a.len().min(t + 1) {
            e -= a[j] * (w[t - j] - mu);
        }
        for j in 1..b.len().min(t + 1) {
            e -= b[j] * errors[t - j];
        }
        errors.push(e);
    }
    errors
}

/// Gaussian log-likelihood with the variance profiled out: `(loglik, sigma2)`.
fn profile_loglik(errors: &[f64]) -> Result<(f64, f64)> {
    let n = errors.len() as f64;
    let sigma2 = errors.iter().map(|e| e * e).sum::<f64>() / n;
    if !sigma2.is_finite() {
        return Err(Error::Evaluation("error recursion is not finite".into()));
    }
    if sigma2 <= f64::MIN_POSITIVE {
        return Err(Error::Evaluation("residual variance is zero".into()));
    }
    Ok((-0.5 * n * ((2.0 * PI * sigma2).ln() + 1.0), sigma2))
}

/// Conditional log-likelihood of the differenced series `w` at packed,
/// unconstrained `params` (ar, ma, sar, sma, constant).
pub fn css_loglik(spec: &SarimaSpec, params: &[f64], w: &[f64]) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::Length("empty series".into()));
    }
    let coef = Coefficients::from_unconstrained(spec, params)?;
    if !params.iter().all(|p| p.is_finite()) {
        return Err(Error::Evaluation("non-finite parameters".into()));
    }
    profile_loglik(&css_residuals(spec, &coef, w)).map(|(ll, _)| ll)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SarimaFit {
    pub spec: SarimaSpec,
    pub coefficients: Coefficients,
    pub sigma2: f64,
    pub loglik: f64,
    pub aic: f64,
    /// Length of the differenced series the likelihood was computed on.
    pub n_effective: usize,
    pub iterations: usize,
}

impl SarimaFit {
    /// Builds a fit from known coefficients, scoring them on `y`.
    pub fn from_coefficients(spec: SarimaSpec, coefficients: Coefficients, y: &[f64]) -> Result<Self> {
        let w = difference(y, spec.d, spec.seasonal_d, spec.period)?;
        let (loglik, sigma2) = profile_loglik(&css_residuals(&spec, &coefficients, &w))?;
        Ok(Self {
            spec,
            coefficients,
            sigma2,
            loglik,
            aic: aic(spec.num_params(), loglik),
            n_effective: w.len(),
            iterations: 0,
        })
    }

    /// Flat `key = value` lines for model tables.
    pub fn to_report(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let c = &self.coefficients;
        format!(
            "spec = {}\nar = {}\nma = {}\nsar = {}\nsma = {}\nconstant = {}\nsigma2 = {}\nloglik = {}\naic = {}\nn_effective = {}\n",
            self.spec,
            list(&c.ar),
            list(&c.ma),
            list(&c.sar),
            list(&c.sma),
            if self.spec.include_constant { c.constant.to_string() } else { "none".into() },
            self.sigma2,
            self.loglik,
            self.aic,
            self.n_effective,
        )
    }
}

pub fn aic(num_params: usize, loglik: f64) -> f64 {
    2.0 * num_params as f64 - 2.0 * loglik
}

/// Fits `spec` to a fully observed series.
pub fn fit(spec: &SarimaSpec, series: &TimeSeries) -> Result<SarimaFit> {
    fit_values(spec, &series.complete_values()?)
}

/// Fits `spec` to raw values by maximizing the conditional likelihood with
/// Nelder-Mead from zero coefficients and the differenced-series mean.
pub fn fit_values(spec: &SarimaSpec, y: &[f64]) -> Result<SarimaFit> {
    fit_values_with(spec, y, &NelderMeadConfig::default())
}

pub fn fit_values_with(spec: &SarimaSpec, y: &[f64], nm: &NelderMeadConfig) -> Result<SarimaFit> {
    spec.validate(usize::MAX)?;
    let w = difference(y, spec.d, spec.seasonal_d, spec.period)?;
    let k = spec.num_params();
    if w.len() < 10 * k {
        return Err(Error::Length(format!(
            "{spec}: {} differenced observations, need at least {} for {k} parameters",
            w.len(),
            10 * k
        )));
    }
    let mut start = vec![0.0; spec.packed_len()];
    if spec.include_constant {
        *start.last_mut().unwrap() = w.iter().sum::<f64>() / w.len() as f64;
    }
    let objective = |x: &[f64]| css_loglik(spec, x, &w).map_or(f64::INFINITY, |ll| -ll);
    let best = nelder_mead(objective, &start, nm)?;
    if !best.value.is_finite() {
        return Err(Error::Evaluation(format!("{spec}: no finite likelihood found")));
    }
    let coefficients = Coefficients::from_unconstrained(spec, &best.point)?;
    let mut fit = SarimaFit::from_coefficients(*spec, coefficients, y)?;
    fit.iterations = best.iterations;
    Ok(fit)
}

/// Point forecasts with 95% Gaussian intervals on the original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub start: NaiveDate,
    pub mean: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
}

/// Forecasts `horizon` days past the end of `series`.
pub fn forecast(fit: &SarimaFit, series: &TimeSeries, horizon: usize) -> Result<Forecast> {
    let y = series.complete_values()?;
    let (mean, lower95, upper95) = forecast_values(fit, &y, horizon)?;
    Ok(Forecast {
        start: add_days(series.end(), 1),
        mean,
        lower95,
        upper95,
    })
}

/// `(mean, lower95, upper95)` for the `horizon` steps after `y`.
pub fn forecast_values(
    fit: &SarimaFit,
    y: &[f64],
    horizon: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if horizon == 0 {
        return Err(Error::Length("forecast horizon must be at least 1".into()));
    }
    let spec = &fit.spec;
    let coef = &fit.coefficients;
    let mut w = difference(y, spec.d, spec.seasonal_d, spec.period)?;
    let mut errors = css_residuals(spec, coef, &w);
    let a = coef.ar_polynomial(spec.period);
    let b = coef.ma_polynomial(spec.period);
    let mu = coef.constant;
    let n = w.len();
    for t in n..n + horizon {
        let mut next = mu;
        for j in 1..a.len().min(t + 1) {
            next += a[j] * (w[t - j] - mu);
        }
        for j in 1..b.len().min(t + 1) {
            next += b[j] * errors[t - j];
        }
        w.push(next);
        errors.push(0.0);
    }
    let lost = spec.lost_to_differencing();
    let level = integrate(&w, &y[..lost], spec.d, spec.seasonal_d, spec.period)?;
    let mean = level[level.len() - horizon..].to_vec();

    let psi = psi_weights(fit, horizon);
    let mut cumulative = 0.0;
    let mut lower = Vec::with_capacity(horizon);
    let mut upper = Vec::with_capacity(horizon);
    for (h, m) in mean.iter().enumerate() {
        cumulative += psi[h] * psi[h];
        let half = Z95 * (fit.sigma2 * cumulative).sqrt();
        lower.push(m - half);
        upper.push(m + half);
    }
    if !mean.iter().chain(&lower).chain(&upper).all(|v| v.is_finite()) {
        return Err(Error::Evaluation("forecast is not finite".into()));
    }
    Ok((mean, lower, upper))
}

/// First `count` weights of the MA(inf) form of the integrated model.
pub fn psi_weights(fit: &SarimaFit, count: usize) -> Vec<f64> {
    let spec = &fit.spec;
    let a = fit.coefficients.ar_polynomial(spec.period);
    let diff = differencing_polynomial(spec.d, spec.seasonal_d, spec.period);
    // (1 - sum a_j B^j)(1 - sum c_j B^j) = 1 - sum alpha_j B^j
    let to_full = |c: &[f64]| -> Vec<f64> {
        c.iter().enumerate().map(|(j, v)| if j == 0 { 1.0 } else { -v }).collect()
    };
    let full = multiply(&to_full(&a), &to_full(&diff));
    let alpha: Vec<f64> = full.iter().map(|v| -v).collect();
    let b = fit.coefficients.ma_polynomial(spec.period);

    let mut psi = Vec::with_capacity(count);
    for j in 0..count {
        let mut v = if j == 0 { 1.0 } else { b.get(j).copied().unwrap_or(0.0) };
        for i in 1..alpha.len().min(j + 1) {
            v += alpha[i] * psi[j - i];
        }
        psi.push(v);
    }
    psi
}
