use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use condtest_cli::read_records_csv;

fn condtest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condtest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn spec_file(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn run_writes_csv_with_the_fixed_header() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_file(
        dir.path(),
        "u.json",
        r#"{"kind":"generator","name":"uniform","params":{"n":1000}}"#,
    );
    let out = dir.path().join("out.csv");
    let status = condtest(&[
        "run",
        "--tester",
        "pcond_uniform",
        "--dist",
        spec.to_str().unwrap(),
        "--eps",
        "0.5",
        "--trials",
        "5",
        "--seed",
        "11",
        "--profile",
        "desk",
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "trial,seed,verdict,estimate,samp,cond,pcond,icond,total,millis"
    );
    let records = read_records_csv(text.as_bytes()).unwrap();
    assert_eq!(records.len(), 5);
    assert!(records
        .iter()
        .all(|r| r.verdict.is_some() && r.ledger.cond == 0 && r.ledger.icond == 0));
}

#[test]
fn json_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = spec_file(
        dir.path(),
        "d.json",
        r#"{"kind":"explicit","weights":[1,2,3,4,5,6,7,8]}"#,
    );
    let args = [
        "run",
        "--tester",
        "distance",
        "--dist",
        d.to_str().unwrap(),
        "--eps",
        "0.5",
        "--trials",
        "3",
        "--seed",
        "4",
        "--format",
        "json",
    ];
    let parse = |o: Output| -> serde_json::Value { serde_json::from_slice(&o.stdout).unwrap() };
    let (a, b) = (parse(condtest(&args)), parse(condtest(&args)));
    assert_eq!(a["report"], b["report"]);
    assert_eq!(a["report"]["profile_id"], "desk");
    assert!(a["report"]["estimate_mean"].is_f64());
}

#[test]
fn second_spec_is_passed_through() {
    let dir = tempfile::tempdir().unwrap();
    let u = spec_file(
        dir.path(),
        "u.json",
        r#"{"kind":"generator","name":"uniform","params":{"n":64}}"#,
    );
    let out = condtest(&[
        "run",
        "--tester",
        "cond_known",
        "--dist",
        u.to_str().unwrap(),
        "--dist2",
        u.to_str().unwrap(),
        "--eps",
        "0.5",
        "--trials",
        "4",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let missing = condtest(&[
        "run",
        "--tester",
        "cond_known",
        "--dist",
        u.to_str().unwrap(),
        "--eps",
        "0.5",
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn sweep_reports_rows_in_n_order() {
    let dir = tempfile::tempdir().unwrap();
    let u = spec_file(
        dir.path(),
        "u.json",
        r#"{"kind":"generator","name":"uniform","params":{"n":2}}"#,
    );
    let out = condtest(&[
        "sweep",
        "--tester",
        "icond_uniform",
        "--n-grid",
        "4096,1024",
        "--dist",
        u.to_str().unwrap(),
        "--eps",
        "0.5",
        "--trials",
        "3",
        "--format",
        "json",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ns: Vec<u64> = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["n"].as_u64().unwrap())
        .collect();
    assert_eq!(ns, vec![1024, 4096]);
}

#[test]
fn validate_prints_exact_distance() {
    let dir = tempfile::tempdir().unwrap();
    let half = spec_file(
        dir.path(),
        "h.json",
        r#"{"kind":"generator","name":"half_split","params":{"n":4,"eps":0.25}}"#,
    );
    let out = condtest(&["dist", "validate", half.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("normalized = true"), "{text}");
    assert!(text.contains("d_TV to uniform = 0.25"), "{text}");

    let uniform = spec_file(
        dir.path(),
        "u.json",
        r#"{"kind":"generator","name":"uniform","params":{"n":1024}}"#,
    );
    let out = condtest(&["dist", "validate", uniform.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );

    let raw = spec_file(
        dir.path(),
        "r.json",
        r#"{"kind":"explicit","weights":[1,3]}"#,
    );
    let out = condtest(&["dist", "validate", raw.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("d_TV to uniform = 0.25"));

    let bad = spec_file(
        dir.path(),
        "b.json",
        r#"{"kind":"generator","name":"half_split","params":{"n":5,"eps":0.25}}"#,
    );
    assert_eq!(
        condtest(&["dist", "validate", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn unknown_tester_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let u = spec_file(
        dir.path(),
        "u.json",
        r#"{"kind":"generator","name":"uniform","params":{"n":8}}"#,
    );
    let out = condtest(&[
        "run",
        "--tester",
        "nope",
        "--dist",
        u.to_str().unwrap(),
        "--eps",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown tester"));
}
