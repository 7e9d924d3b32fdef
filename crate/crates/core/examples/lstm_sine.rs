//! Train the single-layer LSTM on a noiseless sine and roll a recursive
//! 50-step forecast past the end of the data.
//!
//! cargo run --release --example lstm_sine

use cfcast::lstm::{forecast_recursive, train_values, write_net, LstmConfig};

fn main() -> cfcast::Result<()> {
    let wave = |t: usize| 2.0 + (2.0 * std::f64::consts::PI * t as f64 / 50.0).sin();
    let y: Vec<f64> = (0..600).map(wave).collect();
    let config = LstmConfig::default();
    let trained = train_values(&y, &config)?;
    for (epoch, loss) in trained.loss_curve.iter().enumerate().step_by(25) {
        println!("epoch {:>3}  mse {loss:.3e}", epoch + 1);
    }
    println!("final     mse {:.3e}", trained.loss_curve.last().unwrap());

    let fc = forecast_recursive(&trained.net, &y, 50)?;
    let mae = fc.iter().enumerate().map(|(k, v)| (v - wave(600 + k)).abs()).sum::<f64>() / 50.0;
    println!("50-step recursive forecast MAE {mae:.4}");

    let mut text = Vec::new();
    write_net(&trained.net, &mut text).expect("write to memory");
    println!("saved net is {} bytes of text", text.len());
    Ok(())
}
