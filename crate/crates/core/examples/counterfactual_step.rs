//! Inject a -20 step into a synthetic weekly series and recover it with the
//! SARIMA counterfactual pipeline, next to a placebo run with no step.
//!
//! cargo run --release --example counterfactual_step

use std::time::Instant;

use cfcast::counterfactual::{run_counterfactual, ModelChoice};
use cfcast::series::{SplitSpec, TimeSeries, Variable};
use cfcast::synthetic::weekly_series;

fn main() -> cfcast::Result<()> {
    let spec = SplitSpec::counterfactual_2020();
    let days = spec.train_len() + spec.horizon();
    let model = ModelChoice::from_kind("sarima")?;
    for (label, step) in [("step -20", -20.0), ("placebo", 0.0)] {
        let values = weekly_series(7, days, 50.0, 6.0, 2.0, Some(spec.train_len()), step);
        let s = TimeSeries::from_values(Variable::No2, spec.train_start, &values)?;
        let t = Instant::now();
        let r = run_counterfactual(&s, &spec, &model)?;
        println!(
            "{label:>9}: {}  mean_excess {:+.3} (se {:.3})  pct {:+.1}%  [{:.1}s]",
            r.model_summary,
            r.mean_excess,
            r.excess_se,
            r.pct_change,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
