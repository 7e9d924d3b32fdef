//! Maps between unconstrained optimizer coordinates and stationary
//! polynomial coefficients via partial autocorrelations.

/// Unconstrained values → coefficients `phi` such that `1 - sum phi_j z^j`
/// has every root outside the unit circle.
///
/// Each input is squashed to a partial autocorrelation in (-1, 1) with `tanh`,
/// then the Durbin-Levinson recursion builds the polynomial.
pub fn to_stationary(unconstrained: &[f64]) -> Vec<f64> {
    let pacf: Vec<f64> = unconstrained.iter().map(|u| u.tanh()).collect();
    pacf_to_coefficients(&pacf)
}

/// Inverse of [`to_stationary`]. Returns `None` if the polynomial is not stationary.
pub fn from_stationary(coefficients: &[f64]) -> Option<Vec<f64>> {
    let pacf = coefficients_to_pacf(coefficients)?;
    Some(pacf.iter().map(|r| r.atanh()).collect())
}

pub fn pacf_to_coefficients(pacf: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(pacf.len());
    for (k, &r) in pacf.iter().enumerate() {
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - r * prev[k - 1 - j];
        }
        phi.push(r);
    }
    phi
}

/// Step-down recursion; `None` when some partial autocorrelation has modulus ≥ 1.
pub fn coefficients_to_pacf(coefficients: &[f64]) -> Option<Vec<f64>> {
    let p = coefficients.len();
    let mut phi = coefficients.to_vec();
    let mut pacf = vec![0.0; p];
    for k in (0..p).rev() {
        let r = phi[k];
        if !(r.abs() < 1.0) {
            return None;
        }
        pacf[k] = r;
        let denom = 1.0 - r * r;
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
        }
        phi.truncate(k);
    }
    Some(pacf)
}
