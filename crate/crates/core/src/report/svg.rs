//! Self-contained SVG charts. Output is a pure function of the input data.

use std::fmt::Write as _;

use chrono::{Datelike, NaiveDate};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"];
/// Light to dark, for heatmap bins.
const BINS: [&str; 6] = ["#fff5eb", "#fdd0a2", "#fdae6b", "#fd8d3c", "#e6550d", "#a63603"];
const MISSING: &str = "#dddddd";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Comment bodies may not contain `--`.
fn comment_safe(s: &str) -> String {
    s.replace("--", "- -")
}

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut svg = Svg { body: String::new(), width, height };
        svg.text(width / 2.0, 24.0, title, "middle", 16.0);
        svg
    }

    fn comment(&mut self, text: &str) {
        let _ = writeln!(self.body, "<!-- {} -->", comment_safe(text));
    }

    fn text(&mut self, x: f64, y: f64, s: &str, anchor: &str, size: f64) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="{size}" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{w:.1}" height="{h:.1}" fill="{fill}" stroke="{stroke}"/>"#
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, dashed: bool) {
        if points.is_empty() {
            return;
        }
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let dash = if dashed { r#" stroke-dasharray="6 3""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"{dash}/>"#,
            pts.join(" ")
        );
    }

    fn polygon(&mut self, points: &[(f64, f64)], fill: &str) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" fill="{fill}" fill-opacity="0.25" stroke="none"/>"#,
            pts.join(" ")
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.1}" cy="{y:.1}" r="{r}" fill="none" stroke="{stroke}"/>"#
        );
    }

    fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            body = self.body
        )
    }
}

/// Linear map from data to pixels.
#[derive(Clone, Copy)]
struct Scale {
    d0: f64,
    d1: f64,
    p0: f64,
    p1: f64,
}

impl Scale {
    fn new(d0: f64, d1: f64, p0: f64, p1: f64) -> Self {
        let (d0, d1) = if d1 > d0 { (d0, d1) } else { (d0 - 1.0, d0 + 1.0) };
        Scale { d0, d1, p0, p1 }
    }

    fn at(&self, v: f64) -> f64 {
        self.p0 + (v - self.d0) / (self.d1 - self.d0) * (self.p1 - self.p0)
    }
}

fn extent<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

fn y_axis(svg: &mut Svg, y: &Scale, label: &str) {
    let x0 = MARGIN_LEFT;
    svg.line(x0, y.p0, x0, y.p1, "#333");
    for k in 0..=4 {
        let v = y.d0 + (y.d1 - y.d0) * k as f64 / 4.0;
        let py = y.at(v);
        svg.line(x0 - 4.0, py, x0, py, "#333");
        svg.line(x0, py, WIDTH - MARGIN_RIGHT, py, "#eeeeee");
        svg.text(x0 - 6.0, py + 4.0, &format!("{v:.1}"), "end", 11.0);
    }
    let _ = writeln!(
        svg.body,
        r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y.p0 + y.p1) / 2.0,
        (y.p0 + y.p1) / 2.0,
        escape(label)
    );
}

fn date_axis(svg: &mut Svg, x: &Scale, dates: &[NaiveDate]) {
    let y0 = HEIGHT - MARGIN_BOTTOM;
    svg.line(x.p0, y0, x.p1, y0, "#333");
    if dates.is_empty() {
        return;
    }
    let step = (dates.len() / 6).max(1);
    for (i, d) in dates.iter().enumerate().step_by(step) {
        let px = x.at(i as f64);
        svg.line(px, y0, px, y0 + 4.0, "#333");
        svg.text(px, y0 + 18.0, &d.to_string(), "middle", 10.0);
    }
}

fn legend(svg: &mut Svg, entries: &[(&str, &str, bool)]) {
    let x = WIDTH - MARGIN_RIGHT + 15.0;
    for (k, (name, color, dashed)) in entries.iter().enumerate() {
        let y = MARGIN_TOP + 20.0 + 20.0 * k as f64;
        svg.polyline(&[(x, y - 4.0), (x + 25.0, y - 4.0)], color, *dashed);
        svg.text(x + 30.0, y, name, "start", 12.0);
    }
}

/// Splits a series into drawable runs, breaking at missing values.
fn segments(values: &[Option<f64>], x: &Scale, y: &Scale) -> Vec<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match v {
            Some(v) => current.push((x.at(i as f64), y.at(*v))),
            None => {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

fn plot_scales(n: usize, lo: f64, hi: f64) -> (Scale, Scale) {
    let x = Scale::new(0.0, n.saturating_sub(1) as f64, MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (lo, hi) = padded(lo, hi);
    let y = Scale::new(lo, hi, HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    (x, y)
}

/// Several series over shared dates.
pub fn line_chart(title: &str, y_label: &str, dates: &[NaiveDate], series: &[(String, Vec<Option<f64>>)]) -> String {
    let mut svg = Svg::new(WIDTH, HEIGHT, title);
    let (lo, hi) = extent(series.iter().flat_map(|(_, v)| v.iter().flatten()));
    let (x, y) = plot_scales(dates.len(), lo, hi);
    y_axis(&mut svg, &y, y_label);
    date_axis(&mut svg, &x, dates);
    for (k, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        svg.comment(&format!("series {name}: {} points", values.len()));
        for seg in segments(values, &x, &y) {
            svg.polyline(&seg, color, false);
        }
    }
    let entries: Vec<(&str, &str, bool)> = series
        .iter()
        .enumerate()
        .map(|(k, (n, _))| (n.as_str(), PALETTE[k % PALETTE.len()], false))
        .collect();
    legend(&mut svg, &entries);
    svg.finish()
}

/// Observed against predicted, with an optional shaded 95% band.
pub fn prediction_chart(
    title: &str,
    y_label: &str,
    dates: &[NaiveDate],
    observed: &[Option<f64>],
    predicted: &[f64],
    band: Option<(&[f64], &[f64])>,
) -> String {
    let mut svg = Svg::new(WIDTH, HEIGHT, title);
    let band_values = band.iter().flat_map(|(lo, hi)| lo.iter().chain(hi.iter()));
    let (lo, hi) = extent(observed.iter().flatten().chain(predicted).chain(band_values));
    let (x, y) = plot_scales(dates.len(), lo, hi);
    y_axis(&mut svg, &y, y_label);
    date_axis(&mut svg, &x, dates);
    match band {
        Some((lower, upper)) => {
            svg.comment("band: 95% forecast interval");
            let mut pts: Vec<(f64, f64)> = upper.iter().enumerate().map(|(i, v)| (x.at(i as f64), y.at(*v))).collect();
            pts.extend(lower.iter().enumerate().rev().map(|(i, v)| (x.at(i as f64), y.at(*v))));
            svg.polygon(&pts, PALETTE[1]);
        }
        None => svg.comment("no interval: this model does not provide one"),
    }
    for seg in segments(observed, &x, &y) {
        svg.polyline(&seg, PALETTE[0], false);
    }
    let pred: Vec<Option<f64>> = predicted.iter().map(|v| Some(*v)).collect();
    for seg in segments(&pred, &x, &y) {
        svg.polyline(&seg, PALETTE[1], true);
    }
    let mut entries = vec![("observed", PALETTE[0], false), ("predicted", PALETTE[1], true)];
    if band.is_none() {
        entries.push(("(no interval)", "#999999", false));
    }
    legend(&mut svg, &entries);
    svg.finish()
}

/// Horizontal bars, drawn in the order given.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let row = 32.0;
    let height = MARGIN_TOP + 20.0 + row * bars.len() as f64 + MARGIN_BOTTOM;
    let mut svg = Svg::new(WIDTH, height, title);
    let max = bars.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let x = Scale::new(0.0, if max > 0.0 { max } else { 1.0 }, 140.0, WIDTH - MARGIN_RIGHT);
    for (k, (name, v)) in bars.iter().enumerate() {
        let top = MARGIN_TOP + 20.0 + row * k as f64;
        svg.comment(&format!("{name} = {v}"));
        svg.text(132.0, top + row / 2.0 + 4.0, name, "end", 12.0);
        svg.rect(140.0, top + 4.0, x.at(*v) - 140.0, row - 8.0, PALETTE[0], "none");
        svg.text(x.at(*v) + 6.0, top + row / 2.0 + 4.0, &format!("{v:.3}"), "start", 11.0);
    }
    svg.finish()
}

/// Color bin (0-5) for each value; a constant year uses one bin.
pub fn heat_bins(values: &[Option<f64>]) -> Vec<Option<usize>> {
    let (lo, hi) = extent(values.iter().flatten());
    values
        .iter()
        .map(|v| {
            v.map(|v| {
                if hi > lo {
                    (((v - lo) / (hi - lo) * BINS.len() as f64) as usize).min(BINS.len() - 1)
                } else {
                    0
                }
            })
        })
        .collect()
}

/// One calendar year as a weekday-by-week grid.
pub fn calendar_heatmap(title: &str, year: i32, days: &[(NaiveDate, Option<f64>)]) -> String {
    let cell = 14.0;
    let left = 50.0;
    let top = MARGIN_TOP + 20.0;
    let mut svg = Svg::new(left + 54.0 * cell + 40.0, top + 7.0 * cell + 90.0, title);
    let values: Vec<Option<f64>> = days.iter().map(|(_, v)| *v).collect();
    let bins = heat_bins(&values);
    let (lo, hi) = extent(values.iter().flatten());
    let jan1 = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year");
    let offset = jan1.weekday().num_days_from_monday() as i64;
    for (k, name) in ["Mon", "Wed", "Fri", "Sun"].iter().enumerate() {
        svg.text(left - 6.0, top + (2 * k) as f64 * cell + cell - 3.0, name, "end", 10.0);
    }
    for ((date, v), bin) in days.iter().zip(&bins) {
        if date.year() != year {
            continue;
        }
        let idx = (*date - jan1).num_days() + offset;
        let (week, weekday) = (idx / 7, idx % 7);
        let fill = bin.map(|b| BINS[b]).unwrap_or(MISSING);
        svg.comment(&format!("{date} {}", v.map(|v| v.to_string()).unwrap_or_else(|| "missing".into())));
        svg.rect(left + week as f64 * cell, top + weekday as f64 * cell, cell - 1.0, cell - 1.0, fill, "none");
    }
    let legend_y = top + 7.0 * cell + 30.0;
    let used: std::collections::BTreeSet<usize> = bins.iter().flatten().copied().collect();
    for (k, color) in BINS.iter().enumerate() {
        if !used.contains(&k) && hi > lo {
            continue;
        }
        if hi <= lo && k > 0 {
            break;
        }
        svg.rect(left + k as f64 * 60.0, legend_y, 20.0, 12.0, color, "#999");
    }
    let range = if lo.is_finite() { format!("{lo:.1} .. {hi:.1}") } else { "no data".into() };
    svg.text(left, legend_y + 30.0, &format!("range {range}; grey = missing"), "start", 11.0);
    svg.finish()
}

/// Tukey hinges: the median of each half, the median included in both halves for odd counts.
pub fn tukey_hinges(sorted: &[f64]) -> Option<(f64, f64, f64)> {
    fn median(v: &[f64]) -> f64 {
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let half = n.div_ceil(2);
    Some((median(&sorted[..half]), median(sorted), median(&sorted[n - half..])))
}

/// Five-number summary with whiskers at the furthest data within 1.5 IQR.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = tukey_hinges(&v)?;
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence).collect();
    Some(BoxStats {
        q1,
        median,
        q3,
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers: v.into_iter().filter(|x| *x < lo_fence || *x > hi_fence).collect(),
    })
}

/// Side-by-side observed and predicted boxes for each calendar month.
pub fn monthly_boxplot(title: &str, y_label: &str, dates: &[NaiveDate], observed: &[Option<f64>], predicted: &[f64]) -> String {
    let mut months: Vec<(i32, u32)> = dates.iter().map(|d| (d.year(), d.month())).collect();
    months.dedup();
    let groups: Vec<((i32, u32), Vec<f64>, Vec<f64>)> = months
        .iter()
        .map(|&(y, m)| {
            let idx = dates.iter().enumerate().filter(|(_, d)| d.year() == y && d.month() == m).map(|(i, _)| i);
            let obs = idx.clone().filter_map(|i| observed[i]).collect();
            let pred = idx.map(|i| predicted[i]).collect();
            ((y, m), obs, pred)
        })
        .collect();
    let mut svg = Svg::new(WIDTH, HEIGHT, title);
    let (lo, hi) = extent(observed.iter().flatten().chain(predicted));
    let (lo, hi) = padded(lo, hi);
    let y = Scale::new(lo, hi, HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    y_axis(&mut svg, &y, y_label);
    let slot = (WIDTH - MARGIN_RIGHT - MARGIN_LEFT) / groups.len().max(1) as f64;
    svg.line(MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM, WIDTH - MARGIN_RIGHT, HEIGHT - MARGIN_BOTTOM, "#333");
    for (k, ((yr, m), obs, pred)) in groups.iter().enumerate() {
        let centre = MARGIN_LEFT + slot * (k as f64 + 0.5);
        svg.text(centre, HEIGHT - MARGIN_BOTTOM + 18.0, &format!("{yr}-{m:02}"), "middle", 11.0);
        for (j, (values, color)) in [(obs, PALETTE[0]), (pred, PALETTE[1])].into_iter().enumerate() {
            let Some(b) = box_stats(values) else { continue };
            svg.comment(&format!(
                "{yr}-{m:02} {}: q1={} median={} q3={} whiskers={}..{}",
                if j == 0 { "observed" } else { "predicted" },
                b.q1,
                b.median,
                b.q3,
                b.whisker_low,
                b.whisker_high
            ));
            let w = (slot * 0.3).min(40.0);
            let cx = centre + if j == 0 { -w * 0.6 } else { w * 0.6 };
            svg.line(cx, y.at(b.whisker_low), cx, y.at(b.q1), color);
            svg.line(cx, y.at(b.q3), cx, y.at(b.whisker_high), color);
            svg.line(cx - w / 4.0, y.at(b.whisker_low), cx + w / 4.0, y.at(b.whisker_low), color);
            svg.line(cx - w / 4.0, y.at(b.whisker_high), cx + w / 4.0, y.at(b.whisker_high), color);
            svg.rect(cx - w / 2.0, y.at(b.q3), w, y.at(b.q1) - y.at(b.q3), "white", color);
            svg.line(cx - w / 2.0, y.at(b.median), cx + w / 2.0, y.at(b.median), color);
            for o in &b.outliers {
                svg.circle(cx, y.at(*o), 2.5, color);
            }
        }
    }
    legend(&mut svg, &[("observed", PALETTE[0], false), ("predicted", PALETTE[1], false)]);
    svg.finish()
}
