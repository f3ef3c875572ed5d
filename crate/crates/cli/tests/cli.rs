use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn xtalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xtalk")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr is one JSON object")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Simulate, analyze and report a small fixed-seed campaign into `dir`.
fn pipeline(dir: &Path) -> (String, String) {
    let log = dir.join("log.jsonl");
    let reports = dir.join("reports.jsonl");
    let out = dir.join("summary");
    let sim = xtalk(&[
        "simulate", "--circuit", "cl", "--n", "600", "--m", "12", "--seed", "2024",
        "--crosstalk-ba", "0.2", "--out", path_str(&log),
    ]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let analyze = xtalk(&[
        "analyze", "--log", path_str(&log), "--out", path_str(&reports), "--n-est", "200",
        "--hypotheses", "ns,owns-ab,owns-ba,l,q1ab", "--threads", "3",
    ]);
    assert!(analyze.status.success(), "{}", String::from_utf8_lossy(&analyze.stderr));
    let report = xtalk(&[
        "report", "--reports", path_str(&reports), "--out-dir", path_str(&out), "--alphas", "0.05,0.01",
        "--device", "sim", "--qubit-pair", "(0,1)",
    ]);
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    (
        std::fs::read_to_string(out.join("summary.csv")).unwrap(),
        std::fs::read_to_string(out.join("histogram.json")).unwrap(),
    )
}

#[test]
fn simulate_writes_one_record_per_trial() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("log.jsonl");
    let out = xtalk(&["simulate", "--circuit", "cnl", "--n", "1800", "--m", "100", "--seed", "7", "--out", path_str(&log)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["format_version"], 1);
    assert_eq!(header["provenance"]["seed"], 7);
    assert_eq!(lines.count(), 180_000);
}

#[test]
fn analyze_emits_one_report_per_test() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("log.jsonl");
    let reports = dir.path().join("reports.jsonl");
    assert!(xtalk(&["simulate", "--n", "900", "--m", "5", "--seed", "3", "--out", path_str(&log)]).status.success());
    let out = xtalk(&[
        "analyze", "--log", path_str(&log), "--out", path_str(&reports), "--n-est", "600",
        "--hypotheses", "ns,owns-ab,owns-ba,l,q1ab",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&reports).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0]["config"]["protocol"]["n_est"], 600);
    for (k, r) in lines[1..].iter().enumerate() {
        assert_eq!(r["test_id"], k as u64);
        assert_eq!(r["outcomes"].as_array().unwrap().len(), 5);
        assert_eq!(r["n_test"], 300);
    }
}

#[test]
fn golden_summary_is_reproduced() {
    let dir = TempDir::new().unwrap();
    let (csv, histogram) = pipeline(dir.path());
    let golden = std::fs::read_to_string(golden_dir().join("summary.csv")).expect("golden file present");
    assert_eq!(csv, golden);
    let hist: serde_json::Value = serde_json::from_str(&histogram).unwrap();
    for (h, bins) in hist["bins"].as_object().unwrap() {
        let total: u64 = bins.as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
        assert_eq!(total, 12, "histogram for {h}");
    }
}

#[test]
fn two_runs_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(pipeline(a.path()), pipeline(b.path()));
    for name in ["log.jsonl", "reports.jsonl"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 5\n[simulate]\nn = 50\nm = 2\ncircuit = \"cl\"\n").unwrap();
    let log = dir.path().join("log.jsonl");
    let out = xtalk(&["simulate", "--config", path_str(&cfg), "--m", "3", "--out", path_str(&log)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&log).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["config"]["n_trials"], 50);
    assert_eq!(header["config"]["n_tests"], 3);
    assert_eq!(header["config"]["circuit"], "cl");
    assert_eq!(header["provenance"]["seed"], 5);
    assert_eq!(text.lines().count(), 1 + 150);
}

#[test]
fn validation_errors_exit_2_with_json() {
    let dir = TempDir::new().unwrap();
    let missing = xtalk(&["analyze", "--log", "/nonexistent/log.jsonl", "--out", path_str(&dir.path().join("r"))]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(stderr_json(&missing)["error"]["kind"], "invalid_config");

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"test_id\":0,\"trial_index\":0,\"x\":0,\"y\":0,\"a\":0,\"b\":0}\n{\"test_id\":0,\"trial_index\":1,\"x\":0,\"y\":0,\"a\":2,\"b\":0}\n").unwrap();
    let range = xtalk(&["analyze", "--log", path_str(&bad), "--out", path_str(&dir.path().join("r"))]);
    assert_eq!(range.status.code(), Some(2));
    let err = stderr_json(&range);
    assert_eq!(err["error"]["kind"], "range_error");
    assert!(err["error"]["message"].as_str().unwrap().contains("line 2"));

    let usage = xtalk(&["simulate", "--bogus"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(stderr_json(&usage)["exit_code"], 2);

    let log = dir.path().join("log.jsonl");
    assert!(xtalk(&["simulate", "--n", "40", "--m", "1", "--out", path_str(&log)]).status.success());
    let alpha = xtalk(&["analyze", "--log", path_str(&log), "--out", path_str(&dir.path().join("r")), "--alpha", "1.5"]);
    assert_eq!(alpha.status.code(), Some(2));
    let short = xtalk(&["analyze", "--log", path_str(&log), "--out", path_str(&dir.path().join("r")), "--n-est", "40"]);
    assert_eq!(short.status.code(), Some(2));
    assert_eq!(stderr_json(&short)["error"]["kind"], "too_few_trials");
}

#[test]
fn unordered_log_needs_sort_flag() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("log.jsonl");
    let mut text = String::new();
    // Trial indices descending; every setting appears in the estimation half.
    for k in (0..40u64).rev() {
        let (x, y) = ((k % 4 / 2) as usize, (k % 2) as usize);
        text += &format!("{{\"test_id\":0,\"trial_index\":{k},\"x\":{x},\"y\":{y},\"a\":0,\"b\":1}}\n");
    }
    std::fs::write(&log, text).unwrap();
    let out = dir.path().join("r.jsonl");
    let args = ["analyze", "--log", path_str(&log), "--out", path_str(&out), "--n-est", "20", "--hypotheses", "ns"];
    let rejected = xtalk(&args);
    assert_eq!(rejected.status.code(), Some(2));
    assert_eq!(stderr_json(&rejected)["error"]["kind"], "unordered_trials");
    let mut sorted = args.to_vec();
    sorted.push("--sort-trials");
    assert!(xtalk(&sorted).status.success());
}

#[test]
fn solver_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("log.jsonl");
    assert!(xtalk(&["simulate", "--n", "200", "--m", "1", "--out", path_str(&log)]).status.success());
    let out = xtalk(&[
        "analyze", "--log", path_str(&log), "--out", path_str(&dir.path().join("r")), "--n-est", "100",
        "--hypotheses", "q1", "--max-iterations", "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["exit_code"], 3);
    assert!(err["error"]["message"].as_str().unwrap().contains("q1"));
}

#[test]
fn help_exits_0() {
    let out = xtalk(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("simulate"));
}
