use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mdport_cli::io::{ingest_prices, read_allocation};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/prices_2020.csv")
}

fn mdport(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdport"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_line(out: &Output) -> String {
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().filter(|l| l.starts_with("error ")).collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    lines[0].to_owned()
}

#[test]
fn unknown_model_is_a_usage_error() {
    let out = mdport(&["solve", "--prices", path(&fixture()), "--model", "capm"]);
    let line = error_line(&out);
    assert!(line.starts_with("error kind=usage message="), "{line}");
    assert!(line.contains("capm"));
}

#[test]
fn bad_flag_is_a_usage_error() {
    let out = mdport(&["backtest", "--nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out).starts_with("error kind=usage"));
}

#[test]
fn rho_is_required_where_it_binds() {
    let line = error_line(&mdport(&["backtest", "--prices", path(&fixture()), "--models", "simultaneous,md"]));
    assert!(line.starts_with("error kind=usage"), "{line}");
    assert!(line.contains("--rho"));

    let dir = tempfile::tempdir().unwrap();
    let out = mdport(&["solve", "--prices", path(&fixture()), "--model", "simultaneous", "--out", path(dir.path())]);
    assert!(out.status.success());
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdport(&["ingest", "--prices", path(&dir.path().join("absent.csv"))]);
    assert!(error_line(&out).starts_with("error kind=io"));
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.csv");
    fs::write(&file, "date,A,B\n2020-01-02,1,2\n2020-01-03,1,x\n").unwrap();
    let line = error_line(&mdport(&["ingest", "--prices", path(&file), "--out", path(dir.path())]));
    assert!(line.starts_with("error kind=parse"), "{line}");
    assert!(line.contains("line 3"), "{line}");

    fs::write(&file, "day,A\n2020-01-02,1\n").unwrap();
    let line = error_line(&mdport(&["ingest", "--prices", path(&file)]));
    assert!(line.starts_with("error kind=header"), "{line}");
}

#[test]
fn ingest_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    assert!(mdport(&["ingest", "--prices", path(&fixture()), "--out", path(&first)]).status.success());
    let cleaned = first.join("prices.csv");
    assert!(mdport(&["ingest", "--prices", path(&cleaned), "--out", path(&second)]).status.success());
    assert_eq!(
        fs::read(&cleaned).unwrap(),
        fs::read(second.join("prices.csv")).unwrap()
    );
    assert_eq!(
        ingest_prices(&fixture()).unwrap().prices,
        ingest_prices(&cleaned).unwrap().prices
    );
}

#[test]
fn missing_prices_drop_the_ticker() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("gaps.csv");
    fs::write(&file, "date,A,B,C\n2020-01-03,1,2,3\n2020-01-02,1,,3\n2020-01-06,1.1,2,3.3\n").unwrap();
    let got = ingest_prices(&file).unwrap();
    assert_eq!(got.dropped, vec!["B".to_owned()]);
    assert_eq!(got.prices.tickers(), ["A", "C"]);
    let dates: Vec<String> = got.prices.dates().iter().map(|d| d.to_string()).collect();
    assert_eq!(dates, ["2020-01-02", "2020-01-03", "2020-01-06"]);
}

#[test]
fn solve_writes_a_valid_allocation() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdport(&[
        "solve",
        "--prices",
        path(&fixture()),
        "--model",
        "md-milp",
        "--train-end",
        "2020-05-01",
        "--rho",
        "0",
        "--out",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("model=md-milp status=optimal"), "{stdout}");
    let weights = read_allocation(&dir.path().join("allocation.csv")).unwrap();
    let sum: f64 = weights.iter().map(|(_, w)| w).sum();
    assert!((sum - 1.0).abs() < 1e-8);
    assert!(weights.iter().all(|(_, w)| *w == 0.0 || (0.05 - 1e-9..=0.5 + 1e-9).contains(w)));
    assert!(dir.path().join("report.csv").is_file());
}

#[test]
fn manifest_reruns_reproduce_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let status = mdport(&[
        "sweep-lambda",
        "--prices",
        path(&fixture()),
        "--grid-n",
        "12",
        "--out",
        path(&out),
        "--format",
        "markdown",
    ])
    .status;
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let args: Vec<String> = manifest["args"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a.as_str().unwrap().to_owned())
        .collect();
    let before: Vec<(String, Vec<u8>)> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|o| o["deterministic"].as_bool().unwrap())
        .map(|o| {
            let file = o["file"].as_str().unwrap().to_owned();
            let bytes = fs::read(out.join(&file)).unwrap();
            (file, bytes)
        })
        .collect();
    assert!(before.iter().any(|(f, _)| f == "frontier.md"));
    fs::remove_dir_all(&out).unwrap();

    let rerun = Command::new(env!("CARGO_BIN_EXE_mdport")).args(&args).output().unwrap();
    assert!(rerun.status.success());
    for (file, bytes) in before {
        assert_eq!(fs::read(out.join(&file)).unwrap(), bytes, "{file}");
    }
}

#[test]
fn report_collects_tables() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results");
    let report = dir.path().join("report");
    let bt = mdport(&["backtest", "--prices", path(&fixture()), "--models", "md,markowitz", "--rho", "0", "--out", path(&results)]);
    assert!(bt.status.success());
    let out = mdport(&["report", "--dir", path(&results), "--out", path(&report)]);
    assert!(out.status.success());
    let doc = fs::read_to_string(report.join("report.md")).unwrap();
    assert!(doc.contains("## In-sample performance"));
    assert!(doc.contains("## Out-of-sample performance"));
    assert!(doc.contains("| MD |"), "{doc}");

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let line = error_line(&mdport(&["report", "--dir", path(&empty), "--out", path(&report)]));
    assert!(line.starts_with("error kind=usage"));
}
