//! Load a daily pollutant table, summarize gaps and weekly means, and draw a
//! calendar heatmap.
//!
//! cargo run --release --example inspect_series [-- path/to/table.csv]

use chrono::Datelike;

use cfcast::report::svg::calendar_heatmap;
use cfcast::report::{weekly_means_csv, write_atomic};
use cfcast::series::{interpolate_missing, load_all, weekly_mean, ymd, Variable};
use cfcast::synthetic::aqi_table;

fn main() -> cfcast::Result<()> {
    let dir = std::env::temp_dir().join("cfcast-inspect");
    std::fs::create_dir_all(&dir).map_err(|e| cfcast::Error::io(&dir, e))?;
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            // A year of synthetic data with every tenth AQI reading blanked.
            let table = aqi_table(3, ymd(2019, 1, 1), 365)?;
            let mut text = String::from("date");
            for s in &table {
                text += &format!(",{}", s.variable().column_name());
            }
            for i in 0..365 {
                text += &format!("\n{}", table[0].date_at(i));
                for s in &table {
                    let blank = s.variable() == Variable::Aqi && i % 10 == 3;
                    text += &match s.values()[i] {
                        Some(v) if !blank => format!(",{v:.1}"),
                        _ => ",".into(),
                    };
                }
            }
            let p = dir.join("table.csv");
            write_atomic(&p, text.as_bytes())?;
            p
        }
    };

    let table = load_all(&path)?;
    for s in &table {
        let filled = interpolate_missing(s, 3);
        println!(
            "{:>6}: {} days from {}, {} missing, {} left after filling gaps up to 3 days",
            s.variable().display_name(),
            s.len(),
            s.start(),
            s.missing_count(),
            filled.series.missing_count()
        );
    }

    let aqi = table.iter().find(|s| s.variable() == Variable::Aqi).unwrap_or(&table[0]);
    let weeks = weekly_mean(aqi);
    println!("first weeks of {}:", aqi.variable().display_name());
    for (start, mean) in weeks.iter().take(4) {
        println!("  {start}  {}", mean.map_or("-".into(), |m| format!("{m:.2}")));
    }

    let year = aqi.start().year();
    let days: Vec<_> = aqi
        .observations()
        .filter(|o| o.date.year() == year)
        .map(|o| (o.date, (!o.missing).then_some(o.value)))
        .collect();
    let svg = dir.join(format!("heatmap_{year}.svg"));
    write_atomic(&svg, calendar_heatmap(&format!("Daily AQI {year}"), year, &days).as_bytes())?;
    let series: Vec<_> = table.iter().collect();
    write_atomic(&dir.join("weekly_means.csv"), &weekly_means_csv(&series)?)?;
    println!("wrote {} and weekly_means.csv", svg.display());
    Ok(())
}
