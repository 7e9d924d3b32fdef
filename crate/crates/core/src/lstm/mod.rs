//! Single-layer LSTM forecaster with a linear read-out.
//!
//! Each gate sees the concatenation `z = [h_{t-1}, x_t]`:
//!
//! ```text
//! f_t  = sigmoid(W_f z + b_f)
//! i_t  = sigmoid(W_i z + b_i)
//! C~_t = tanh(W_C z + b_C)
//! C_t  = f_t * C_{t-1} + i_t * C~_t
//! o_t  = sigmoid(W_o z + b_o)
//! h_t  = o_t * tanh(C_t)
//! ```
//!
//! Gate matrices are stored row-major with shape `H x (H + input_size)`.

mod backprop;
mod io;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use backprop::{batch_loss, gradient, sgd_step};
pub use io::{read_net, write_net, FORMAT_VERSION};
pub use train::{train, train_values, LstmConfig, Trained};

/// Weights and bias of one gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Gate {
    fn zeros(hidden: usize, width: usize) -> Self {
        Self {
            w: vec![0.0; hidden * width],
            b: vec![0.0; hidden],
        }
    }

    /// `W z + b`
    fn affine(&self, z: &[f64]) -> Vec<f64> {
        let width = z.len();
        self.b
            .iter()
            .enumerate()
            .map(|(r, b)| {
                let row = &self.w[r * width..(r + 1) * width];
                b + row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect()
    }
}

/// Every trainable parameter. Gradients use the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub forget: Gate,
    pub input: Gate,
    pub candidate: Gate,
    pub output: Gate,
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input_size: usize) -> Self {
        let width = hidden + input_size;
        Self {
            forget: Gate::zeros(hidden, width),
            input: Gate::zeros(hidden, width),
            candidate: Gate::zeros(hidden, width),
            output: Gate::zeros(hidden, width),
            head_w: vec![0.0; hidden],
            head_b: 0.0,
        }
    }

    fn gates(&self) -> [&Gate; 4] {
        [&self.forget, &self.input, &self.candidate, &self.output]
    }

    fn gates_mut(&mut self) -> [&mut Gate; 4] {
        [
            &mut self.forget,
            &mut self.input,
            &mut self.candidate,
            &mut self.output,
        ]
    }

    /// All parameters in a fixed order: gates f, i, C, o (weights then bias), head weights, head bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in self.gates() {
            out.extend(&g.w);
            out.extend(&g.b);
        }
        out.extend(&self.head_w);
        out.push(self.head_b);
        out
    }

    /// Inverse of [`LstmParams::to_flat`].
    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut k = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[k..k + dst.len()]);
            k += dst.len();
        };
        for g in self.gates_mut() {
            take(&mut g.w);
            take(&mut g.b);
        }
        take(&mut self.head_w);
        self.head_b = flat[flat.len() - 1];
    }

    pub fn len(&self) -> usize {
        4 * (self.forget.w.len() + self.forget.b.len()) + self.head_w.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet {
    pub hidden_size: usize,
    pub input_size: usize,
    pub params: LstmParams,
    /// Window length `L` the net was trained on.
    pub window: usize,
    /// Min-max normalization range of the training data.
    pub norm_min: f64,
    pub norm_max: f64,
}

impl LstmNet {
    /// All-zero parameters on the identity normalization `[0, 1]`.
    pub fn zeros(hidden_size: usize, input_size: usize, window: usize) -> Self {
        Self {
            hidden_size,
            input_size,
            params: LstmParams::zeros(hidden_size, input_size),
            window,
            norm_min: 0.0,
            norm_max: 1.0,
        }
    }

    /// Uniform(-scale, scale) weights from `seed`, with the forget bias set to 1.
    pub fn init(hidden_size: usize, input_size: usize, window: usize, scale: f64, seed: u64) -> Self {
        let mut net = Self::zeros(hidden_size, input_size, window);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut flat = net.params.to_flat();
        for v in &mut flat {
            *v = rng.random_range(-scale..scale);
        }
        net.params.set_flat(&flat);
        net.params.forget.b.iter_mut().for_each(|b| *b = 1.0);
        net
    }

    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.norm_min) / (self.norm_max - self.norm_min)
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        self.norm_min + v * (self.norm_max - self.norm_min)
    }

    fn concat(&self, h: &[f64], x: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.hidden_size + self.input_size);
        z.extend_from_slice(h);
        z.extend_from_slice(x);
        z.resize(self.hidden_size + self.input_size, 0.0);
        z
    }
}

/// Hidden and cell state of the recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Gate activations and states recorded at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    /// `[h_{t-1}, x_t]`
    pub z: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub candidate: Vec<f64>,
    pub o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn step_traced(net: &LstmNet, state: &CellState, x: &[f64]) -> StepTrace {
    let z = net.concat(&state.h, x);
    let p = &net.params;
    let f: Vec<f64> = p.forget.affine(&z).into_iter().map(sigmoid).collect();
    let i: Vec<f64> = p.input.affine(&z).into_iter().map(sigmoid).collect();
    let candidate: Vec<f64> = p.candidate.affine(&z).into_iter().map(f64::tanh).collect();
    let o: Vec<f64> = p.output.affine(&z).into_iter().map(sigmoid).collect();
    let c: Vec<f64> = (0..net.hidden_size)
        .map(|k| f[k] * state.c[k] + i[k] * candidate[k])
        .collect();
    let h: Vec<f64> = (0..net.hidden_size).map(|k| o[k] * c[k].tanh()).collect();
    StepTrace {
        z,
        f,
        i,
        candidate,
        o,
        c_prev: state.c.clone(),
        c,
        h,
    }
}

/// One application of the gate equations.
///
/// `x` shorter than `input_size` is zero-padded.
pub fn cell_step(net: &LstmNet, state: &CellState, x: &[f64]) -> CellState {
    let t = step_traced(net, state, x);
    CellState { h: t.h, c: t.c }
}

/// Runs the window from a zero state; returns the normalized-scale prediction
/// and the per-step trace.
pub fn forward(net: &LstmNet, window: &[f64]) -> (f64, Vec<StepTrace>) {
    let mut state = CellState::zeros(net.hidden_size);
    let mut trace = Vec::with_capacity(window.len());
    for &x in window {
        let step = step_traced(net, &state, &[x]);
        state = CellState {
            h: step.h.clone(),
            c: step.c.clone(),
        };
        trace.push(step);
    }
    let p = &net.params;
    let pred = p.head_b + p.head_w.iter().zip(&state.h).map(|(w, h)| w * h).sum::<f64>();
    (pred, trace)
}

/// Prediction only, without keeping the trace.
pub fn predict(net: &LstmNet, window: &[f64]) -> f64 {
    let mut state = CellState::zeros(net.hidden_size);
    for &x in window {
        state = cell_step(net, &state, &[x]);
    }
    let p = &net.params;
    p.head_b + p.head_w.iter().zip(&state.h).map(|(w, h)| w * h).sum::<f64>()
}

/// A supervised pair: `L` consecutive values and the value that follows.
pub type Sample = (Vec<f64>, f64);

/// Frames `y` as `(y[t-L..t], y[t])` pairs in time order.
pub fn make_windows(y: &[f64], window: usize) -> Result<Vec<Sample>> {
    if window == 0 {
        return Err(Error::Length("window must be at least 1".into()));
    }
    if y.len() <= window {
        return Err(Error::Length(format!(
            "{} values cannot fill a window of {window} plus a target",
            y.len()
        )));
    }
    Ok((window..y.len())
        .map(|t| (y[t - window..t].to_vec(), y[t]))
        .collect())
}

/// Rolls one-step predictions forward from the last `L` observations
/// (original scale). Outputs are denormalized and floored at zero.
pub fn forecast_recursive(net: &LstmNet, tail: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::Length("forecast horizon must be at least 1".into()));
    }
    if tail.len() < net.window {
        return Err(Error::Length(format!(
            "need the last {} observations, got {}",
            net.window,
            tail.len()
        )));
    }
    let mut window: Vec<f64> = tail[tail.len() - net.window..]
        .iter()
        .map(|v| net.normalize(*v))
        .collect();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let next = predict(net, &window);
        out.push(net.denormalize(next).max(0.0));
        window.remove(0);
        window.push(next);
    }
    Ok(out)
}
