//! End-to-end checks of the command-line surface: record shape, replay,
//! determinism, and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_memulsion"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn parse_stdout(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

/// The comparable part of a record: everything except `meta`.
fn stripped(mut v: serde_json::Value) -> serde_json::Value {
    v.as_object_mut().unwrap().remove("meta");
    v
}

fn temp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("memulsion-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn kappa_counts_the_unit_column() {
    let out = run(&["kappa", "--L", "1", "--u", "3", "--l", "0", "--enumerate"]);
    assert!(out.status.success());
    let v = parse_stdout(&out);
    assert_eq!(v["result"]["count"], "2");
    assert_eq!(v["result"]["enumerated"], 2);
    let kappa = v["result"]["kappa"].as_f64().unwrap();
    assert!((kappa - 2f64.ln() / 3.0).abs() < 1e-12);
}

#[test]
fn kappa_limit_rows_are_monotone() {
    let out = run(&["kappa", "--L", "1", "--u", "3", "--l", "0", "--widths", "1,2,4"]);
    assert!(out.status.success());
    let v = parse_stdout(&out);
    let rows = v["result"]["limit"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let max = v["result"]["limit"]["estimate"].as_f64().unwrap();
    assert!(max >= rows[0]["kappa"].as_f64().unwrap());
}

#[test]
fn records_are_deterministic() {
    let args = [
        "phi", "--L", "2", "--mu", "3", "--alpha", "2", "--beta", "1", "--samples", "16",
        "--seed", "11",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success() && b.status.success());
    // Byte-identical once the timing metadata is stripped.
    let a = serde_json::to_string(&stripped(parse_stdout(&a))).unwrap();
    let b = serde_json::to_string(&stripped(parse_stdout(&b))).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stored_records_replay_bit_identically() {
    let record = temp_path("kappa-record.json");
    let out = run(&[
        "kappa",
        "--L",
        "3",
        "--u",
        "3",
        "--l",
        "2/3",
        "--out",
        record.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stored: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&record).unwrap()).unwrap();
    let replay = run(&["kappa", "--config", record.to_str().unwrap()]);
    assert!(replay.status.success());
    assert_eq!(stripped(parse_stdout(&replay)), stripped(stored));
    std::fs::remove_file(&record).ok();
}

#[test]
fn varfe_records_replay_bit_identically() {
    let record = temp_path("varfe-record.json");
    let args = [
        "varfe",
        "--field-seed",
        "4",
        "--M",
        "1",
        "--m",
        "3",
        "--N",
        "4",
        "--measures",
        "2",
        "--seed",
        "5",
        "--alpha",
        "2",
        "--beta",
        "1",
        "--L-oracle",
        "8",
        "--phi-width",
        "4",
        "--phi-samples",
        "8",
        "--out",
    ];
    let out = bin()
        .args(args)
        .arg(record.to_str().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stored: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&record).unwrap()).unwrap();
    let replay = run(&["varfe", "--config", record.to_str().unwrap()]);
    assert!(
        replay.status.success(),
        "{}",
        String::from_utf8_lossy(&replay.stderr)
    );
    assert_eq!(stripped(parse_stdout(&replay)), stripped(stored));
    std::fs::remove_file(&record).ok();
}

#[test]
fn schema_errors_exit_2() {
    // Parity violation in (u, l).
    let out = run(&["kappa", "--L", "2", "--u", "3/2", "--l", "0"]);
    assert_eq!(out.status.code(), Some(2));
    // Unknown flag (clap).
    let out = run(&["kappa", "--nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    // Cone violation.
    let out = run(&[
        "phi", "--L", "2", "--mu", "2", "--alpha", "1", "--beta", "2", "--samples", "4",
    ]);
    assert_eq!(out.status.code(), Some(2));
    // Missing required parameter.
    let out = run(&["kappa", "--u", "3", "--l", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compute_budget_errors_exit_1() {
    // Valid spec, but far beyond the exact-DP step budget.
    let out = run(&["kappa", "--L", "600", "--u", "1", "--l", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn measures_emit_normalized_atoms() {
    let out = run(&[
        "measures",
        "--p",
        "0.5",
        "--field-seed",
        "5",
        "--M",
        "1",
        "--m",
        "3",
        "--N",
        "4",
        "--measures",
        "2",
        "--seed",
        "3",
    ]);
    assert!(out.status.success());
    let v = parse_stdout(&out);
    let measures = v["result"]["measures"].as_array().unwrap();
    assert_eq!(measures.len(), 2);
    for m in measures {
        let total: f64 = m["atoms"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| a[1].as_f64().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn varfe_writes_the_sweep_csv() {
    let csv = temp_path("varfe.csv");
    let out = run(&[
        "varfe",
        "--field-seed",
        "3",
        "--M",
        "1",
        "--m",
        "3",
        "--N",
        "4",
        "--measures",
        "2",
        "--seed",
        "9",
        "--alpha-list",
        "1.5,2.0",
        "--beta-list",
        "1.0",
        "--L-oracle",
        "8",
        "--phi-width",
        "4",
        "--phi-samples",
        "8",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "p,alpha,beta,value,best_measure,residual,iterations"
    );
    assert_eq!(lines.count(), 2); // one row per (α, β) point
    let v = parse_stdout(&out);
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 2);
    std::fs::remove_file(&csv).ok();
}

#[test]
fn out_dir_env_prefixes_relative_paths() {
    let dir = temp_path("outdir");
    std::fs::create_dir_all(&dir).unwrap();
    let out = bin()
        .args(["kappa", "--L", "1", "--u", "1", "--l", "0", "--out", "rec.json"])
        .env("MEMULSION_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.join("rec.json").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn selfcheck_passes_and_prints_named_items() {
    let out = run(&["selfcheck"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[PASS] count-dp-vs-enumeration"));
    assert!(text.contains("[PASS] ratio-solver-vs-dense-grid"));
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn phi_scan_writes_csv() {
    let csv = temp_path("mu-scan.csv");
    let out = run(&[
        "phi",
        "--L",
        "2",
        "--mu-grid",
        "1,2,3",
        "--alpha",
        "1",
        "--beta",
        "0",
        "--samples",
        "8",
        "--seed",
        "2",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("mu,mean,std_error,mu_phi,mu_phi_se\n"));
    assert_eq!(text.lines().count(), 4);
    std::fs::remove_file(&csv).ok();
}

#[test]
fn simulate_reports_each_length() {
    let out = run(&[
        "simulate",
        "--n-list",
        "6,8",
        "--block-size",
        "2",
        "--M",
        "1",
        "--alpha",
        "0",
        "--beta",
        "0",
        "--samples",
        "2",
    ]);
    assert!(out.status.success());
    let v = parse_stdout(&out);
    let rows = v["result"]["report"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    // Zero coupling: the free energy is disorder-independent.
    for row in rows {
        assert_eq!(row["std"].as_f64().unwrap(), 0.0);
    }
}
