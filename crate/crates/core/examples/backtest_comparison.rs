//! Rank SARIMA, LSTM and boosted trees by held-out MSE on the standard
//! backtest window (train 2017-2018, predict 2019-01-01..2019-04-30).
//!
//! cargo run --release --example backtest_comparison

use cfcast::boost::GbtForecastConfig;
use cfcast::counterfactual::{compare_models, Forecaster, ModelChoice};
use cfcast::lstm::LstmConfig;
use cfcast::sarima::SarimaGrid;
use cfcast::series::{SplitSpec, TimeSeries, Variable};
use cfcast::synthetic::weekly_series;

fn main() -> cfcast::Result<()> {
    let spec = SplitSpec::backtest_2019();
    let values = weekly_series(9, spec.train_len() + spec.horizon(), 60.0, 8.0, 4.0, None, 0.0);
    let s = TimeSeries::from_values(Variable::No2, spec.train_start, &values)?;

    let sarima = ModelChoice::Sarima(SarimaGrid::default());
    let lstm = ModelChoice::Lstm(LstmConfig { epochs: 60, ..LstmConfig::default() });
    let gbt = ModelChoice::Gbt(GbtForecastConfig::default());
    let models: [&dyn Forecaster; 3] = [&sarima, &lstm, &gbt];
    let cmp = compare_models(&s, &spec, &models)?;
    println!("held-out MSE over {} days:", spec.horizon());
    for r in &cmp.ranked {
        println!("  {:<7} {:>8.3}  ({} days used)", r.model, r.mse, r.days_used);
    }
    for (model, why) in &cmp.failures {
        println!("  {model} failed: {why}");
    }
    Ok(())
}
