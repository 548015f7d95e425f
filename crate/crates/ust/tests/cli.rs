//! The `ust` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ust::artifacts::{read_csv, read_json, RunSummary, SeedSummary, TraceRow};

fn ust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ust")).args(args).env("UST_LOG", "off").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ust(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_one_trace_per_seed_and_an_averaged_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&["run", "--scenario", "plain", "--variant", "ust", "--seeds", "1..5", "--frames", "40", "--out", path(&out)]);
    for seed in 1..=5 {
        let trace: Vec<TraceRow> = read_csv(&out.join(format!("trace_seed{seed}.csv"))).unwrap();
        assert_eq!(trace.len(), 40);
        assert_eq!(trace[0].frame, 0);
        assert!(out.join(format!("curve_seed{seed}.csv")).is_file());
        let s: SeedSummary = read_json(&out.join(format!("summary_seed{seed}.json"))).unwrap();
        assert_eq!(s.seed, seed);
        assert_eq!(s.oracle_queries, trace.last().unwrap().oracle_queries_cumulative);
    }
    let summary: RunSummary = read_json(&out.join("summary.json")).unwrap();
    assert_eq!(summary.seeds, [1, 2, 3, 4, 5]);
    assert!(summary.mean_auc > 0.5);
    assert!(summary.attributes.row("ALL").is_some());
    let header = fs::read_to_string(out.join("trace_seed1.csv")).unwrap();
    assert!(header.starts_with("frame,x,y,w,h,occluded,uncertain,store_size,oracle_queries_cumulative,retrained\n"));
    let curve = fs::read_to_string(out.join("curve_seed1.csv")).unwrap();
    assert!(curve.starts_with("threshold,success_rate\n"));
    assert_eq!(curve.lines().count(), 102);
}

#[test]
fn knn_only_reports_zero_oracle_queries() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["run", "--scenario", "plain", "--variant", "knn-only", "--frames", "30", "--out", path(dir.path())]);
    let s: SeedSummary = read_json(&dir.path().join("summary_seed1.json")).unwrap();
    assert_eq!(s.oracle_queries, 0);
}

#[test]
fn grid_flag_and_config_file_are_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "[tracker]\nbudget_cap = 50\n[eval]\ngrid = 11\n").unwrap();
    let out = dir.path().join("a");
    ok(&["run", "--scenario", "plain", "--frames", "30", "--config", path(&cfg), "--out", path(&out)]);
    let trace: Vec<TraceRow> = read_csv(&out.join("trace_seed1.csv")).unwrap();
    assert!(trace.iter().skip(1).all(|r| r.store_size <= 50));
    assert_eq!(fs::read_to_string(out.join("curve_seed1.csv")).unwrap().lines().count(), 12);
    let out = dir.path().join("b");
    ok(&["run", "--scenario", "plain", "--frames", "30", "--config", path(&cfg), "--grid", "21", "--out", path(&out)]);
    assert_eq!(fs::read_to_string(out.join("curve_seed1.csv")).unwrap().lines().count(), 22);
}

#[test]
fn scenario_files_and_store_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("occl.toml");
    ok(&["export", "scenario", "occlusion", "--seed", "2", "--out", path(&spec)]);
    let text = fs::read_to_string(&spec).unwrap();
    assert!(text.contains("[[occlusions]]"));
    let out = dir.path().join("run");
    ok(&["run", "--scenario", path(&spec), "--frames", "25", "--store-snapshot", "--out", path(&out)]);
    let snap = fs::read_to_string(out.join("store_seed1.csv")).unwrap();
    assert!(snap.starts_with("seq,label,inserted_at,timer,flagged,outlier,prototype,f0,"));
    let s: SeedSummary = read_json(&out.join("summary_seed1.json")).unwrap();
    assert_eq!(snap.lines().count() - 1, s.final_store_size);
    assert_eq!(s.input, "occlusion");
}

#[test]
fn rendered_sequences_can_be_tracked() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("plain-seq");
    ok(&["render", "--scenario", "plain", "--frames", "20", "--out", path(&seq)]);
    assert!(seq.join("frame_000000.ppm").is_file());
    assert!(seq.join("frame_000019.ppm").is_file());
    assert_eq!(fs::read_to_string(seq.join("groundtruth.txt")).unwrap().lines().count(), 20);
    let out = dir.path().join("run");
    ok(&["run", "--sequence", path(&seq), "--variant", "ust", "--out", path(&out)]);
    let s: SeedSummary = read_json(&out.join("summary_seed1.json")).unwrap();
    assert_eq!(s.input, "plain-seq");
    assert_eq!(s.frames, 20);
    assert!(s.auc > 0.5, "auc {}", s.auc);
}

#[test]
fn bench_tabulates_each_attribute_plus_all() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        ok(&["bench", "--seeds", "1..2", "--frames", "20", "--variants", "ust,knn-only", "--out", path(dir.path())]);
    assert!(out.contains("ust"));
    let rows = fs::read_to_string(dir.path().join("attributes.csv")).unwrap();
    let mut lines = rows.lines();
    assert_eq!(lines.next(), Some("variant,attribute,mean_auc,scenarios,runs"));
    // five attributes plus ALL, per variant
    assert_eq!(lines.count(), 12);
    assert!(rows.contains("ust,ALL,"));
    assert!(dir.path().join("fast-motion/knn-only/summary.json").is_file());
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = ust(&["run", "--scenario", "no-such", "--out", path(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown scenario"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[tracker]\nkay = 3\n").unwrap();
    let out = ust(&["run", "--scenario", "plain", "--config", path(&bad), "--out", path(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));

    let out = ust(&["run", "--scenario", "plain", "--variant", "svm", "--out", path(dir.path())]);
    assert!(!out.status.success());

    let file = dir.path().join("file");
    fs::write(&file, "").unwrap();
    let out = ust(&["run", "--scenario", "plain", "--frames", "5", "--out", path(&file.join("sub"))]);
    assert!(!out.status.success());

    let out = ust(&["run", "--sequence", path(dir.path()), "--out", path(&dir.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("groundtruth.txt"));
}

#[test]
fn exported_config_is_a_valid_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("default.toml");
    ok(&["export", "config", "--out", path(&cfg)]);
    ok(&["run", "--scenario", "plain", "--frames", "5", "--config", path(&cfg), "--out", path(&dir.path().join("r"))]);
}
