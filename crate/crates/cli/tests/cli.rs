//! End-to-end tests that drive the compiled `hybridsim` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybridsim"))
}

fn run_ok(args: &[&str]) -> Value {
    let out = bin().args(args).output().expect("spawn hybridsim");
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout must be one JSON report")
}

fn run_raw(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn hybridsim")
}

fn gen_path9(dir: &Path) -> String {
    let p9 = dir.join("p9.el").display().to_string();
    run_ok(&["gen", "--kind", "path", "--n", "9", "-o", &p9]);
    p9
}

#[test]
fn nq_on_a_nine_path_matches_the_frozen_values() {
    let dir = tempfile::tempdir().unwrap();
    let p9 = gen_path9(dir.path());
    let report = run_ok(&["nq", "-g", &p9, "-k", "9", "--gamma", "1"]);
    assert_eq!(report["result"]["nq_num"], 3);
    assert_eq!(report["result"]["nq_den"], 1);
    assert_eq!(report["result"]["d_star"], 2);
    assert_eq!(report["tool"]["name"], "hybridsim");
    assert_eq!(report["seed"], 7);
    // The protocol route reports the same value.
    let protocol = run_ok(&["nq", "-g", &p9, "-k", "9", "--gamma", "1", "--protocol"]);
    assert_eq!(protocol["result"]["nq_num"], 3);
    assert_eq!(protocol["result"]["d_star"], 2);
}

#[test]
fn ksp_reports_the_exact_path_distance() {
    let dir = tempfile::tempdir().unwrap();
    let p9 = gen_path9(dir.path());
    let report = run_ok(&[
        "ksp", "-g", &p9, "--sources", "9", "--targets", "1", "--gamma", "64", "--seed", "7",
    ]);
    let labels = report["result"]["labels"].as_array().unwrap();
    assert!(
        labels.contains(&serde_json::json!([1, 9, 8, 1])),
        "expected label (t=1, s=9) -> 8/1 in {labels:?}"
    );
    assert_eq!(report["result"]["stretch_num"], 1);
    assert_eq!(report["result"]["stretch_den"], 1);
}

#[test]
fn hard_rejects_an_undersized_star_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let s9 = dir.path().join("s9.el").display().to_string();
    run_ok(&["gen", "--kind", "star", "--n", "9", "-o", &s9]);
    let out = run_raw(&["hard", "-g", &s9, "-k", "9", "--gamma", "1", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rejected"), "diagnostic missing: {err}");
}

#[test]
fn hard_emits_edge_list_and_sidecar_for_a_long_path() {
    let dir = tempfile::tempdir().unwrap();
    let p64 = dir.path().join("p64.el").display().to_string();
    run_ok(&["gen", "--kind", "path", "--n", "64", "-o", &p64]);
    let reweighted = dir.path().join("hard64.el").display().to_string();
    let report = run_ok(&[
        "hard", "-g", &p64, "-k", "64", "--gamma", "1", "--seed", "3", "-o", &reweighted,
    ]);
    assert_eq!(report["result"]["verified"], true);
    assert!(report["result"]["sidecar"]["k_prime"].as_u64().unwrap() >= 1);
    let text = std::fs::read_to_string(&reweighted).unwrap();
    assert!(text.lines().count() > 64, "edge list should be written");
}

#[test]
fn route_delivers_every_token() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("lolli.el").display().to_string();
    run_ok(&[
        "gen", "--kind", "lollipop", "--clique", "20", "--tail", "20", "-o", &g,
    ]);
    let report = run_ok(&[
        "route", "-g", &g, "-k", "40", "--gamma", "8", "--targets", "2", "--seed", "5",
    ]);
    assert_eq!(report["result"]["delivery"]["delivered_count"], 80);
}

#[test]
fn audit_meets_the_entropy_bound_on_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let p64 = dir.path().join("p64.el").display().to_string();
    run_ok(&["gen", "--kind", "path", "--n", "64", "-o", &p64]);
    let report = run_ok(&[
        "audit", "-g", &p64, "-k", "64", "--gamma", "1", "--runs", "5", "--seed", "11",
    ]);
    assert_eq!(report["result"]["decoded_ok"], 5);
    assert_eq!(report["result"]["audit"]["satisfied"], true);
}

#[test]
fn helpers_pass_their_own_verifier() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("grid.el").display().to_string();
    run_ok(&[
        "gen", "--kind", "grid", "--rows", "8", "--cols", "8", "-o", &g,
    ]);
    let report = run_ok(&[
        "helpers", "-g", &g, "-k", "64", "--gamma", "4", "--targets", "2", "--seed", "9",
    ]);
    assert_eq!(report["result"]["check"]["hop_ok"], true);
    assert_eq!(report["result"]["check"]["size_ok"], true);
}

#[test]
fn sweep_tracks_the_square_root_band_on_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep").display().to_string();
    run_ok(&[
        "bench", "--kind", "path", "--ns", "64,128,256", "--ks", "full", "--gammas", "1",
        "--out", &out,
    ]);
    let csv = std::fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let k: f64 = cells[2].parse().unwrap();
        let nq_num: f64 = cells[4].parse().unwrap();
        let nq_den: f64 = cells[5].parse().unwrap();
        let nq = nq_num / nq_den;
        assert_eq!(cells[12], "ok", "cell failed: {line}");
        assert!(
            nq >= k.sqrt() - 1.0 && nq <= k.sqrt() + 1.0,
            "NQ {nq} outside the square-root band for k = {k}"
        );
        rows += 1;
    }
    assert_eq!(rows, 3);
}

#[test]
fn sweep_isolates_failing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep").display().to_string();
    run_ok(&[
        "bench", "--kind", "path", "--ns", "16", "--ks", "full,0", "--gammas", "1", "--out",
        &out,
    ]);
    let csv = std::fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "header plus two rows: {csv}");
    assert!(lines[1].ends_with(",ok"), "good cell must survive: {}", lines[1]);
    assert!(lines[2].contains("failed:"), "bad cell must be marked: {}", lines[2]);
}

#[test]
fn empty_sweep_grid_exits_one() {
    let out = run_raw(&["bench", "--kind", "path", "--ns", ",", "--out", "/tmp/ignored"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let p9 = gen_path9(dir.path());
    let out_a = dir.path().join("a").display().to_string();
    let out_b = dir.path().join("b").display().to_string();
    for out in [&out_a, &out_b] {
        run_ok(&[
            "ksp", "-g", &p9, "--sources", "4", "--targets", "1", "--gamma", "8", "--seed",
            "21", "--mode", "skeleton", "--x", "3", "--out", out,
        ]);
    }
    let a = std::fs::read(dir.path().join("a/report.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/report.json")).unwrap();
    assert!(!a.is_empty());
    // The argument echo differs only in the --out path, so compare after
    // stripping that one field.
    let mut va: Value = serde_json::from_slice(&a).unwrap();
    let mut vb: Value = serde_json::from_slice(&b).unwrap();
    va["spec"]["out"] = Value::Null;
    vb["spec"]["out"] = Value::Null;
    assert_eq!(va, vb, "reports must match up to the output directory");

    // And a rerun into the same directory reproduces the bytes exactly.
    run_ok(&[
        "ksp", "-g", &p9, "--sources", "4", "--targets", "1", "--gamma", "8", "--seed", "21",
        "--mode", "skeleton", "--x", "3", "--out", &out_a,
    ]);
    let a2 = std::fs::read(dir.path().join("a/report.json")).unwrap();
    assert_eq!(a, a2, "rerun with identical spec must be byte-identical");
}

#[test]
fn help_exits_zero_and_bad_usage_exits_one() {
    let help = run_raw(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let bad = run_raw(&["frobnicate"]);
    assert_eq!(bad.status.code(), Some(1));
    let missing = run_raw(&["nq", "-g", "/nonexistent.el", "-k", "3", "--gamma", "1"]);
    assert_eq!(missing.status.code(), Some(1));
}
