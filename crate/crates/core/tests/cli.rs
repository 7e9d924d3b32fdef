use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cfcast::report::parse_backtest_csv;
use cfcast::series::{ymd, TimeSeries, Variable};
use cfcast::synthetic::aqi_table;

fn cfcast(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cfcast"));
    cmd.args(args).env_remove("CFCAST_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("run cfcast")
}

fn write_table(path: &Path, table: &[TimeSeries], skip: &[Variable]) {
    let cols: Vec<&TimeSeries> = table.iter().filter(|s| !skip.contains(&s.variable())).collect();
    let mut text = String::from("date");
    for s in &cols {
        text += ",";
        text += s.variable().column_name();
    }
    for i in 0..cols[0].len() {
        text += &format!("\n{}", cols[0].date_at(i));
        for s in &cols {
            text += &format!(",{}", s.values()[i].unwrap());
        }
    }
    text.push('\n');
    std::fs::write(path, text).unwrap();
}

fn four_years(dir: &Path, skip: &[Variable]) -> PathBuf {
    let start = ymd(2017, 1, 1);
    let days = (ymd(2020, 12, 31) - start).num_days() as usize + 1;
    let path = dir.join("table.csv");
    write_table(&path, &aqi_table(2, start, days).unwrap(), skip);
    path
}

fn files(dir: &Path, ext: &str) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(ext))
        .collect();
    names.sort();
    names
}

fn assert_svgs_parse(dir: &Path) {
    for name in files(dir, ".svg") {
        let text = std::fs::read_to_string(dir.join(&name)).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(doc.root_element().tag_name().name(), "svg", "{name}");
    }
}

fn stdout_lines(out: &Output) -> usize {
    String::from_utf8_lossy(&out.stdout).lines().count()
}

#[test]
fn inspect_emits_one_heatmap_per_year() {
    let dir = tempfile::tempdir().unwrap();
    let input = four_years(dir.path(), &[]);
    let out_dir = dir.path().join("out");
    let out = cfcast(
        &["inspect", "--input", input.to_str().unwrap(), "--variable", "aqi", "--out-dir", out_dir.to_str().unwrap()],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let heatmaps: Vec<String> = files(&out_dir, ".svg").into_iter().filter(|n| n.starts_with("heatmap_")).collect();
    assert_eq!(heatmaps, ["heatmap_aqi_2017.svg", "heatmap_aqi_2018.svg", "heatmap_aqi_2019.svg", "heatmap_aqi_2020.svg"]);
    assert_eq!(files(&out_dir, ".csv"), ["weekly_means.csv"]);
    assert_eq!(stdout_lines(&out), 6);
    assert_svgs_parse(&out_dir);
}

#[test]
fn importance_is_normalized_and_led_by_pm25() {
    let dir = tempfile::tempdir().unwrap();
    let input = four_years(dir.path(), &[]);
    let out_dir = dir.path().join("out");
    let out = cfcast(&["importance", "--input", input.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("importance.csv")).unwrap();
    let mut rows = csv.lines().skip(1).map(|l| l.split_once(',').unwrap());
    let (top, _) = rows.next().unwrap();
    assert_eq!(top, "pm2_5");
    let total: f64 = csv.lines().skip(1).map(|l| l.split_once(',').unwrap().1.parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() <= 1e-9, "sum {total}");
    let summary = std::fs::read_to_string(out_dir.join("importance_summary.txt")).unwrap();
    assert!(summary.contains("accuracy = "));
    assert_svgs_parse(&out_dir);
}

#[test]
fn missing_o3_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = four_years(dir.path(), &[Variable::O3]);
    let out = cfcast(&["importance", "--input", input.to_str().unwrap(), "--out-dir", dir.path().join("o").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing column o3"), "{err}");
}

#[test]
fn backtest_table_has_nine_cells() {
    let dir = tempfile::tempdir().unwrap();
    let input = four_years(dir.path(), &[]);
    let config = dir.path().join("run.cfg");
    std::fs::write(
        &config,
        format!(
            "input = {}\nout_dir = {}\nmodel.lstm.epochs = 3\nmodel.sarima.max_p = 1\nmodel.sarima.max_q = 1\n",
            input.display(),
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let out = cfcast(&["backtest", "--config", config.to_str().unwrap(), "--seed", "1"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");
    let table = parse_backtest_csv(&std::fs::read_to_string(out_dir.join("backtest_mse.csv")).unwrap()).unwrap();
    assert_eq!(table.models, ["sarima", "lstm", "gbt"]);
    assert_eq!(table.variables, [Variable::No2, Variable::Pm25, Variable::O3]);
    assert_eq!(table.cells.iter().flatten().filter(|c| c.is_ok()).count(), 9);
    let text = std::fs::read_to_string(out_dir.join("backtest_mse.txt")).unwrap();
    assert!(text.starts_with("MSE"));
    assert_eq!(files(&out_dir, ".svg").len(), 9);
    assert_svgs_parse(&out_dir);
}

#[test]
fn counterfactual_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = four_years(dir.path(), &[]);
    let out_dir = dir.path().join("out");
    let out = cfcast(
        &[
            "counterfactual",
            "--input",
            input.to_str().unwrap(),
            "--variable",
            "no2",
            "--model",
            "sarima,gbt",
            "--train-start",
            "2018-01-01",
            "--predict-end",
            "2020-03-31",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_lines(&out), 8);
    let summary = std::fs::read_to_string(out_dir.join("cf_no2_sarima_summary.txt")).unwrap();
    assert!(summary.contains("mean_excess = ") && summary.contains("pct_change = "));
    assert!(summary.contains("train = 2018-01-01"));
    let gbt = std::fs::read_to_string(out_dir.join("cf_no2_gbt_summary.txt")).unwrap();
    assert!(gbt.contains("interval = none"));
    let daily = std::fs::read_to_string(out_dir.join("cf_no2_sarima.csv")).unwrap();
    assert_eq!(daily.lines().next(), Some("date,observed,predicted,lower95,upper95"));
    assert_eq!(daily.lines().count(), 1 + 91);
    assert_svgs_parse(&out_dir);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = four_years(dir.path(), &[]);
    let input = input.to_str().unwrap();
    let out_dir = dir.path().join("out");
    let out_dir = out_dir.to_str().unwrap();

    let no_input = cfcast(&["inspect", "--out-dir", out_dir], &[]);
    assert_eq!(no_input.status.code(), Some(2));
    let missing = cfcast(&["inspect", "--input", "/nonexistent/x.csv"], &[]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "colour = blue\n").unwrap();
    let out = cfcast(&["inspect", "--config", bad.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let bad_date = cfcast(&["backtest", "--input", input, "--train-end", "2019-02-30"], &[]);
    assert_eq!(bad_date.status.code(), Some(2));

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let blocked = blocker.join("sub");
    let io = cfcast(&["inspect", "--input", input, "--variable", "aqi", "--out-dir", blocked.to_str().unwrap()], &[]);
    assert_eq!(io.status.code(), Some(5));
}

#[test]
fn seed_flag_takes_precedence_over_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = four_years(dir.path(), &[]);
    let args = ["inspect", "--input", input.to_str().unwrap(), "--variable", "aqi", "--out-dir"];
    let out_dir = dir.path().join("out");
    let with = |extra: &[&str], env: &[(&str, &str)]| {
        let mut all: Vec<&str> = args.to_vec();
        all.push(out_dir.to_str().unwrap());
        all.extend_from_slice(extra);
        cfcast(&all, env).status.code()
    };
    // An unusable environment seed only matters when nothing else sets one.
    assert_eq!(with(&[], &[("CFCAST_SEED", "abc")]), Some(2));
    assert_eq!(with(&["--seed", "4"], &[("CFCAST_SEED", "abc")]), Some(0));
    let cfg = dir.path().join("seed.cfg");
    std::fs::write(&cfg, "seed = 9\n").unwrap();
    assert_eq!(with(&["--config", cfg.to_str().unwrap()], &[("CFCAST_SEED", "abc")]), Some(0));
    assert_eq!(with(&[], &[("CFCAST_SEED", "12")]), Some(0));
}

#[test]
fn help_lists_subcommands() {
    let out = cfcast(&["--help"], &[]);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["inspect", "importance", "backtest", "counterfactual"] {
        assert!(text.contains(sub), "{text}");
    }
    let out = cfcast(&["backtest", "--help"], &[]);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--config", "--input", "--variable", "--model", "--train-start", "--train-end", "--predict-start", "--predict-end", "--seed", "--out-dir"] {
        assert!(text.contains(flag), "{flag}");
    }
}
