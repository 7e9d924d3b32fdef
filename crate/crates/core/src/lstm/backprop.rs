//! Reverse-mode gradients of the window-level squared error, unrolled over
//! the full window.

use rayon::prelude::*;

use super::{forward, predict, LstmNet, LstmParams, Sample};
use crate::error::{Error, Result};

/// Mean squared error of the net over `batch` (normalized scale).
pub fn batch_loss(net: &LstmNet, batch: &[Sample]) -> f64 {
    batch
        .iter()
        .map(|(x, y)| (predict(net, x) - y).powi(2))
        .sum::<f64>()
        / batch.len() as f64
}

/// Gradient of one sample's loss, scaled by `weight`.
fn sample_gradient(net: &LstmNet, window: &[f64], target: f64, weight: f64) -> LstmParams {
    let hidden = net.hidden_size;
    let width = hidden + net.input_size;
    let p = &net.params;
    let mut g = LstmParams::zeros(hidden, net.input_size);

    let (pred, trace) = forward(net, window);
    let d_pred = weight * 2.0 * (pred - target);
    let last_h = trace.last().map(|s| s.h.clone()).unwrap_or_else(|| vec![0.0; hidden]);
    for k in 0..hidden {
        g.head_w[k] = d_pred * last_h[k];
    }
    g.head_b = d_pred;

    let mut dh: Vec<f64> = p.head_w.iter().map(|w| d_pred * w).collect();
    let mut dc = vec![0.0; hidden];
    let mut pre = [
        vec![0.0; hidden],
        vec![0.0; hidden],
        vec![0.0; hidden],
        vec![0.0; hidden],
    ];
    for step in trace.iter().rev() {
        for k in 0..hidden {
            let tc = step.c[k].tanh();
            let d_o = dh[k] * tc;
            dc[k] += dh[k] * step.o[k] * (1.0 - tc * tc);
            let d_f = dc[k] * step.c_prev[k];
            let d_i = dc[k] * step.candidate[k];
            let d_g = dc[k] * step.i[k];
            pre[0][k] = d_f * step.f[k] * (1.0 - step.f[k]);
            pre[1][k] = d_i * step.i[k] * (1.0 - step.i[k]);
            pre[2][k] = d_g * (1.0 - step.candidate[k] * step.candidate[k]);
            pre[3][k] = d_o * step.o[k] * (1.0 - step.o[k]);
            dc[k] *= step.f[k];
        }
        let mut dz = vec![0.0; width];
        for (gate, (grad, da)) in p.gates().into_iter().zip(g.gates_mut().into_iter().zip(&pre)) {
            for r in 0..hidden {
                let a = da[r];
                if a == 0.0 {
                    continue;
                }
                grad.b[r] += a;
                let row = r * width;
                for col in 0..width {
                    grad.w[row + col] += a * step.z[col];
                    dz[col] += gate.w[row + col] * a;
                }
            }
        }
        dh.copy_from_slice(&dz[..hidden]);
    }
    g
}

fn accumulate(into: &mut LstmParams, from: &LstmParams) {
    let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    for (dst, src) in into.gates_mut().into_iter().zip(from.gates()) {
        add(&mut dst.w, &src.w);
        add(&mut dst.b, &src.b);
    }
    add(&mut into.head_w, &from.head_w);
    into.head_b += from.head_b;
}

/// Exact gradient of [`batch_loss`] with respect to every parameter.
///
/// Per-sample gradients are computed in parallel and summed in batch order,
/// so the result does not depend on thread scheduling.
pub fn gradient(net: &LstmNet, batch: &[Sample]) -> Result<LstmParams> {
    if batch.is_empty() {
        return Err(Error::Length("gradient of an empty batch".into()));
    }
    let weight = 1.0 / batch.len() as f64;
    let parts: Vec<LstmParams> = batch
        .par_iter()
        .map(|(x, y)| sample_gradient(net, x, *y, weight))
        .collect();
    let mut total = LstmParams::zeros(net.hidden_size, net.input_size);
    for part in &parts {
        accumulate(&mut total, part);
    }
    Ok(total)
}

/// One gradient-descent update with global-norm clipping. Returns the
/// gradient norm before clipping.
pub fn sgd_step(net: &mut LstmNet, batch: &[Sample], learning_rate: f64, clip_norm: f64) -> Result<f64> {
    let grad = gradient(net, batch)?;
    let norm = grad.norm();
    let scale = if clip_norm > 0.0 && norm > clip_norm {
        clip_norm / norm
    } else {
        1.0
    };
    let mut flat = net.params.to_flat();
    for (p, g) in flat.iter_mut().zip(grad.to_flat()) {
        *p -= learning_rate * scale * g;
    }
    net.params.set_flat(&flat);
    Ok(norm)
}
