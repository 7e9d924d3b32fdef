use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{batch_loss, make_windows, sgd_step, LstmNet, Sample};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmConfig {
    pub hidden_size: usize,
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Global L2 norm the gradient is clipped to; 0 disables clipping.
    pub clip_norm: f64,
    /// Half-width of the uniform weight initialization.
    pub init_scale: f64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            hidden_size: 32,
            window: 14,
            epochs: 200,
            learning_rate: 5e-2,
            batch_size: 32,
            seed: 0,
            clip_norm: 5.0,
            init_scale: 0.08,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub net: LstmNet,
    /// Mean squared error over all training windows after each epoch (normalized scale).
    pub loss_curve: Vec<f64>,
}

/// Trains on a fully observed series.
pub fn train(series: &TimeSeries, config: &LstmConfig) -> Result<Trained> {
    train_values(&series.complete_values()?, config)
}

/// Min-max normalizes `y`, frames it into windows and runs mini-batch
/// gradient descent. Batches are reshuffled every epoch from `config.seed`.
pub fn train_values(y: &[f64], config: &LstmConfig) -> Result<Trained> {
    if config.window == 0 || config.batch_size == 0 || config.hidden_size == 0 {
        return Err(Error::Config(
            "window, batch size and hidden size must be positive".into(),
        ));
    }
    if y.len() <= config.window + 10 {
        return Err(Error::Length(format!(
            "{} observations; LSTM training needs more than window + 10 = {}",
            y.len(),
            config.window + 10
        )));
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 0.0) {
        return Err(Error::Normalization(format!(
            "training data is constant ({lo}); min-max scaling is undefined"
        )));
    }

    let mut net = LstmNet::init(
        config.hidden_size,
        1,
        config.window,
        config.init_scale,
        config.seed,
    );
    net.norm_min = lo;
    net.norm_max = hi;
    let normalized: Vec<f64> = y.iter().map(|v| net.normalize(*v)).collect();
    let samples = make_windows(&normalized, config.window)?;

    // Separate stream from the initializer so shuffles don't depend on net size.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5bd1_e995);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Sample> = chunk.iter().map(|&k| samples[k].clone()).collect();
            sgd_step(&mut net, &batch, config.learning_rate, config.clip_norm)?;
        }
        let loss = batch_loss(&net, &samples);
        if !loss.is_finite() || !net.params.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        loss_curve.push(loss);
    }
    Ok(Trained { net, loss_curve })
}
