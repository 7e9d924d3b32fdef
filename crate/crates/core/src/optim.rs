//! Derivative-free minimization with the Nelder-Mead simplex.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadConfig {
    pub max_iterations: usize,
    /// Stop once the largest vertex distance from the best vertex falls below this.
    pub diameter_tol: f64,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            diameter_tol: 1e-6,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Minimizes `f` from `start`. Non-finite objective values are treated as `+inf`.
///
/// Returns [`Error::Convergence`] carrying the best vertex when the iteration
/// limit is reached first.
pub fn nelder_mead<F>(f: F, start: &[f64], config: &NelderMeadConfig) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    if n == 0 {
        return Ok(Minimum {
            point: Vec::new(),
            value: eval(start),
            iterations: 0,
        });
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), eval(start)));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += config.initial_step;
        let v = eval(&x);
        simplex.push((x, v));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    loop {
        // Stable sort keeps the ordering deterministic on ties.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if diameter(&simplex) < config.diameter_tol {
            break;
        }
        if iterations >= config.max_iterations {
            let (point, value) = simplex.swap_remove(0);
            return Err(Error::Convergence {
                iterations,
                best_point: point,
                best_value: value,
            });
        }
        iterations += 1;

        let worst = simplex[n].clone();
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(alpha);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(gamma);
            let fe = eval(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        // Contraction, outside if the reflection beat the worst vertex.
        let (contracted, fc) = if fr < worst.1 {
            let c = along(rho);
            let v = eval(&c);
            (c, v)
        } else {
            let c = along(-rho);
            let v = eval(&c);
            (c, v)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + sigma * (v - b))
                .collect();
            let v = eval(&x);
            *vertex = (x, v);
        }
    }

    let (point, value) = simplex.swap_remove(0);
    Ok(Minimum {
        point,
        value,
        iterations,
    })
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(x, _)| {
            x.iter()
                .zip(best)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}
