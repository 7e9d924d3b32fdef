//! Which pollutant drives high-AQI days? Fit the boosted classifier on a
//! synthetic table where AQI tracks PM2.5, then print gain importance and
//! the first tree.
//!
//! cargo run --release --example boosted_importance

use cfcast::boost::{aqi_influence, write_ensemble, BoostConfig, Loss};
use cfcast::series::ymd;
use cfcast::synthetic::aqi_table;

fn main() -> cfcast::Result<()> {
    let table = aqi_table(5, ymd(2017, 1, 1), 1000)?;
    let config = BoostConfig { loss: Loss::Logistic, ..BoostConfig::default() };
    let report = aqi_influence(&table, 150.0, 0.8, &config)?;
    println!(
        "trained on {} days, tested on {}: accuracy {:.3}",
        report.n_train, report.n_test, report.accuracy
    );
    for f in &report.importance {
        println!("  {:<6} {:.4} {}", f.feature, f.gain, "#".repeat((f.gain * 40.0).round() as usize));
    }

    let mut text = Vec::new();
    write_ensemble(&report.ensemble, &mut text).expect("write to memory");
    let text = String::from_utf8(text).expect("ascii");
    let first_tree: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("tree")).take(8).collect();
    println!("\n{}", first_tree.join("\n"));
    Ok(())
}
