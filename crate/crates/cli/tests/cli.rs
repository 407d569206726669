use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use regimecast::garch::GarchParams;
use regimecast::simlab::{simulate, write_prices_csv};
use regimecast::ParamVector;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regimecast"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Simulated GARCH prices written as `date,price`.
fn price_file(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let p = ParamVector::Garch(GarchParams {
        delta: 0.05,
        alpha0: 0.1,
        alpha1: 0.08,
        beta: 0.88,
        nu: 7.0,
    });
    let sim = simulate(&p, n, 500, seed).unwrap();
    let path = dir.join(format!("prices_{seed}.csv"));
    write_prices_csv(&sim.returns, fs::File::create(&path).unwrap()).unwrap();
    path
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn missing_price_column_is_a_data_error_naming_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = price_file(dir.path(), 300, 1);
    let out = dir.path().join("out");
    let o = run(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--price-column",
        "settle",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("settle"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["fit", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["fit", "--input", "/no/such/file.csv"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--model", "garch", "--params", "0,0.1,0.5,0.6,7"]).status.code(), Some(1));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn horizon_longer_than_out_of_sample_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = price_file(dir.path(), 300, 2);
    let out = dir.path().join("out");
    let o = run(&[
        "forecast",
        "--input",
        input.to_str().unwrap(),
        "--models",
        "garch",
        "--horizons",
        "500",
        "--restarts",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("forecast daily garch k=500"));
}

#[test]
fn fit_writes_a_five_row_garch_table_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let input = price_file(dir.path(), 600, 3);
    let out = dir.path().join("out");
    let o = run(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--models",
        "garch",
        "--restarts",
        "2",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("fit_daily.csv")).unwrap();
    assert!(text.starts_with("# regimecast "));
    assert!(text.contains("# config_sha256 "));
    assert!(text.contains("# seeds "));
    let params: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("daily,garch,"))
        .map(|l| l.split(',').nth(2).unwrap())
        .filter(|p| !matches!(*p, "loglik" | "aic" | "converged"))
        .collect();
    assert_eq!(params, ["delta", "alpha0", "alpha1", "beta", "nu"]);
}

#[test]
fn forecast_csvs_feed_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let input = price_file(dir.path(), 500, 4);
    let out = dir.path().join("fc");
    let o = run(&[
        "forecast",
        "--input",
        input.to_str().unwrap(),
        "--models",
        "garch,gjr",
        "--horizons",
        "1,2",
        "--restarts",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let files: Vec<String> = ["garch", "gjr"]
        .iter()
        .flat_map(|m| [1, 2].map(|k| out.join(format!("forecast_daily_{m}_k{k}.csv")).display().to_string()))
        .collect();
    let ev = dir.path().join("ev");
    let mut args = vec!["evaluate", "--format", "csv", "--out", ev.to_str().unwrap(), "--forecasts"];
    args.extend(files.iter().map(String::as_str));
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(ev.join("evaluation_daily_k1.csv").is_file());
    assert!(ev.join("evaluation_daily_k2.csv").is_file());
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = run(&["simulate", "--model", "gjr", "--n", "300", "--seed", "9", "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(tree(&a), tree(&b));
}

#[test]
fn reproduce_refuses_to_overwrite_and_cleans_up_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    let input = price_file(dir.path(), 300, 5);
    let out = dir.path().join("bundle");
    fs::create_dir(&out).unwrap();
    let o = run(&["reproduce", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&[
        "reproduce",
        "--input",
        input.to_str().unwrap(),
        "--in-sample-end",
        "1999-01-01",
        "--force",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("stage `split daily`"));
    assert!(!dir.path().join("bundle.partial").exists());
}
