use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rankmap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankmap"))
        .args(args)
        .current_dir(dir)
        .env_remove("RANKMAP_SEED")
        .output()
        .expect("spawn rankmap")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = rankmap(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn values(path: &Path) -> Vec<f64> {
    csv_rows(path).1.iter().map(|r| r[1].parse().unwrap()).collect()
}

fn low_rank(dir: &Path) {
    ok(dir, &["gen", "--kind", "low_rank", "--m", "64", "--n", "1000", "--rank", "8", "--seed", "1", "-o", "a.rmap"]);
}

#[test]
fn decompose_recovers_generated_rank() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    low_rank(d);
    ok(d, &["decompose", "a.rmap", "--delta-d", "0", "-o", "f"]);
    let r = json(&d.join("f/report.json"));
    assert_eq!(r["factorization"]["l"], 8);
    assert_eq!(r["factorization"]["m"], 64);
    assert_eq!(r["factorization"]["n"], 1000);
    for file in ["basis.rmap", "coeffs.mtx", "factorization.json", "timing.json"] {
        assert!(d.join("f").join(file).exists(), "{file} missing");
    }
}

#[test]
fn distributed_power_matches_full() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    low_rank(d);
    ok(d, &["decompose", "a.rmap", "--delta-d", "0", "-o", "f"]);
    ok(d, &["solve", "power", "--full", "--data", "a.rmap", "--eigs", "4", "-o", "full"]);
    ok(d, &["solve", "power", "--model", "matrix", "--workers", "4", "--factors", "f", "--eigs", "4", "-o", "mat"]);
    ok(d, &["solve", "power", "--model", "graph", "--workers", "3", "--factors", "f", "--eigs", "4", "-o", "gra"]);
    let full = values(&d.join("full/eigenvalues.csv"));
    assert_eq!(full.len(), 4);
    for other in ["mat", "gra"] {
        let v = values(&d.join(other).join("eigenvalues.csv"));
        for (x, y) in full.iter().zip(&v) {
            assert!((x - y).abs() <= 1e-6 * x.abs(), "{other}: {x} vs {y}");
        }
    }
    let r = json(&d.join("mat/report.json"));
    assert_eq!(r["cost"]["model"], "matrix");
    assert_eq!(r["cost"]["n_c"], 4);
    let applies = r["cost"]["counters"]["applies"].as_u64().unwrap();
    assert_eq!(r["cost"]["counters"]["communicated_values"].as_u64().unwrap(), applies * 2 * 8 * 4);
    assert_eq!(json(&d.join("full/report.json"))["cost"]["model"], "full");
}

#[test]
fn fista_writes_solution_and_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "--kind", "union_of_subspaces", "--m", "30", "--n", "200", "--rank", "3", "--subspaces", "3", "-o", "u.mtx"]);
    ok(d, &["decompose", "u.mtx", "-o", "f"]);
    ok(d, &["solve", "fista", "--factors", "f", "--data", "u.mtx", "--column", "7", "--lambda", "0.01", "-o", "s"]);
    assert_eq!(values(&d.join("s/solution.csv")).len(), 200);
    let (header, rows) = csv_rows(&d.join("s/trace.csv"));
    assert_eq!(header[0], "iteration");
    assert!(!rows.is_empty());
    let r = json(&d.join("s/report.json"));
    assert!(r["metrics"]["psnr_db"].as_f64().unwrap() > 20.0);
    assert!(r["cost"].is_null());
}

#[test]
fn memory_table_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "--kind", "union_of_subspaces", "--m", "64", "--n", "800", "--rank", "4", "--subspaces", "5", "-o", "u.rmap"]);
    ok(d, &["bench", "memory", "u.rmap", "-o", "mem"]);
    let (header, rows) = csv_rows(&d.join("mem/memory.csv"));
    for col in ["original", "least_squares", "rankmap"] {
        assert!(header.iter().any(|h| h == col), "{col} missing from {header:?}");
    }
    let get = |name: &str| -> u64 { rows[0][header.iter().position(|h| h == name).unwrap()].parse().unwrap() };
    assert_eq!(get("original"), 64 * 800);
    assert!(get("rankmap") < get("least_squares") && get("least_squares") < get("original"));
}

#[test]
fn sweep_has_one_row_per_tolerance_and_metric() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "--kind", "low_rank", "--m", "32", "--n", "400", "--rank", "6", "--noise", "0.01", "-o", "a.rmap"]);
    ok(d, &["bench", "sweep", "a.rmap", "--eigs", "3", "-o", "sw"]);
    let (header, rows) = csv_rows(&d.join("sw/sweep.csv"));
    assert_eq!(header, ["delta_d", "l", "nnz_v", "metric", "value"]);
    let mut seen = std::collections::BTreeSet::new();
    for r in &rows {
        assert!(seen.insert((r[0].clone(), r[3].clone())), "duplicate row {r:?}");
    }
    assert_eq!(rows.len(), 5 * 5);
    let nnz: Vec<usize> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(nnz.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn models_table_lists_both_models() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    low_rank(d);
    ok(d, &["decompose", "a.rmap", "-o", "f"]);
    ok(d, &["bench", "models", "--factors", "f", "--workers-list", "1,2,4", "--iterations", "2", "-o", "mo"]);
    let (header, rows) = csv_rows(&d.join("mo/models.csv"));
    assert_eq!(rows.len(), 7);
    let col = header.iter().position(|h| h == "communicated_per_iteration").unwrap();
    for r in rows.iter().filter(|r| r[0] == "matrix") {
        let n_c: u64 = r[1].parse().unwrap();
        assert_eq!(r[col].parse::<u64>().unwrap(), 2 * 8 * n_c);
    }
}

#[test]
fn tune_reports_chosen_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "--kind", "low_rank", "--m", "32", "--n", "300", "--rank", "6", "--noise", "0.01", "-o", "a.rmap"]);
    ok(d, &["tune", "a.rmap", "--target-delta-l", "0.05", "--eigs", "3", "-o", "t"]);
    let r = json(&d.join("t/report.json"));
    let chosen = r["chosen_delta_d"].as_f64().unwrap();
    let trace = r["trace"].as_array().unwrap();
    let last = trace.last().unwrap();
    assert_eq!(last["delta_d"].as_f64().unwrap(), chosen);
    assert!(last["delta_l"].as_f64().unwrap() <= 0.05);
    assert!(d.join("t/basis.rmap").exists());

    let out = rankmap(d, &["tune", "a.rmap", "--target-delta-l", "1e-30", "--eigs", "3", "-o", "t2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unreachable"));
}

#[test]
fn identical_runs_write_identical_reports() {
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for tmp in &runs {
        let d = tmp.path();
        low_rank(d);
        ok(d, &["--workers", "2", "decompose", "a.rmap", "--delta-d", "0.1", "--seed", "5", "-o", "r"]);
        ok(d, &["solve", "power", "--model", "graph", "--workers", "2", "--factors", "r", "--eigs", "2", "-o", "r/p"]);
    }
    for file in ["report.json", "basis.rmap", "coeffs.mtx", "factorization.json", "p/report.json", "p/eigenvalues.csv"] {
        let read = |t: &tempfile::TempDir| String::from_utf8_lossy(&fs::read(t.path().join("r").join(file)).unwrap()).into_owned();
        assert_eq!(read(&runs[0]), read(&runs[1]), "{file}");
    }
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "--kind", "low_rank", "--m", "8", "--n", "20", "--rank", "2", "--seed", "42", "-o", "flag.rmap"]);
    let out = Command::new(env!("CARGO_BIN_EXE_rankmap"))
        .args(["gen", "--kind", "low_rank", "--m", "8", "--n", "20", "--rank", "2", "-o", "env.rmap"])
        .current_dir(d)
        .env("RANKMAP_SEED", "42")
        .output()
        .unwrap();
    assert!(out.status.success());
    ok(d, &["gen", "--kind", "low_rank", "--m", "8", "--n", "20", "--rank", "2", "-o", "zero.rmap"]);
    let flag = fs::read(d.join("flag.rmap")).unwrap();
    assert_eq!(flag, fs::read(d.join("env.rmap")).unwrap());
    assert_ne!(flag, fs::read(d.join("zero.rmap")).unwrap());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let usage = rankmap(d, &["decompose", "a.rmap", "--bogus", "-o", "x"]);
    assert_eq!(usage.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&usage.stderr).contains("Usage"));
    assert_eq!(rankmap(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(rankmap(d, &["--help"]).status.code(), Some(0));

    assert_eq!(rankmap(d, &["decompose", "missing.rmap", "-o", "x"]).status.code(), Some(2));
    fs::write(d.join("bad.rmap"), b"RMAP\x02\x00").unwrap();
    let parse = rankmap(d, &["decompose", "bad.rmap", "-o", "x"]);
    assert_eq!(parse.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("byte"));
    let bad_rank = rankmap(d, &["gen", "--kind", "low_rank", "--m", "4", "--n", "10", "--rank", "4", "-o", "x.rmap"]);
    assert_eq!(bad_rank.status.code(), Some(2));
    let no_data = rankmap(d, &["solve", "power", "--full", "-o", "x"]);
    assert_eq!(no_data.status.code(), Some(2));
}
