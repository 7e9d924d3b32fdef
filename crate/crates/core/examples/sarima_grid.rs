//! AIC grid search over SARIMA orders on a noisy weekly cycle, then a
//! two-week forecast with 95% intervals.
//!
//! cargo run --release --example sarima_grid

use cfcast::sarima::{forecast, grid_search, SarimaGrid};
use cfcast::series::{ymd, TimeSeries, Variable};
use cfcast::synthetic::weekly_series;

fn main() -> cfcast::Result<()> {
    let values = weekly_series(21, 400, 40.0, 5.0, 1.5, None, 0.0);
    let s = TimeSeries::from_values(Variable::No2, ymd(2018, 1, 1), &values)?;

    let search = grid_search(&s, &SarimaGrid::with_period(7))?;
    let mut fits: Vec<_> = search.table.iter().filter_map(|e| e.outcome.as_ref().ok()).collect();
    fits.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    println!("{} candidates, {} fitted; best five by AIC:", search.table.len(), fits.len());
    for f in fits.iter().take(5) {
        println!("  {:<24} aic {:>9.2}  sigma2 {:.3}", f.spec.to_string(), f.aic, f.sigma2);
    }
    print!("\n{}", search.best.to_report());

    let fc = forecast(&search.best, &s, 14)?;
    println!("\nforecast from {}:", fc.start);
    for k in 0..fc.mean.len() {
        println!("  +{:>2}  {:6.2}  [{:6.2}, {:6.2}]", k + 1, fc.mean[k], fc.lower95[k], fc.upper95[k]);
    }
    Ok(())
}
