use std::path::Path;
use std::process::{Command, Output};

use advhedge::data::{synthetic_gbm_series, write_series};
use advhedge_core::backtest::BacktestReport;
use chrono::NaiveDate;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advhedge")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

const QUICK: [&str; 4] = ["--set", "train.epochs=20", "--set", "train.paths_per_epoch=128"];

fn quick_train(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--out", s(out)];
    args.extend(QUICK);
    args.extend(extra);
    run(&args)
}

fn series_csv(dir: &Path, closes: usize) -> std::path::PathBuf {
    let p = dir.join("TEST.csv");
    let series = synthetic_gbm_series(closes, 1.0, 0.2, 4, NaiveDate::from_ymd_opt(2018, 1, 2).unwrap()).unwrap();
    write_series(&p, &series).unwrap();
    p
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["train", "--set", "no_equals_sign"]), 1);
    assert_eq!(code(&["train", "--set", "train.nonsense=3", "--out", s(&d.join("a"))]), 1);
    assert_eq!(code(&["train", "--set", "utility.lambda=-1", "--out", s(&d.join("a"))]), 1);
    assert_eq!(code(&["toy", "--case", "4", "--out", s(&d.join("b"))]), 1);
    assert_eq!(code(&["backtest", "--data", s(&d.join("missing.csv")), "--out", s(&d.join("c"))]), 1);
    assert_eq!(code(&["train", "--config", s(&d.join("missing.toml"))]), 1);
    let blocker = d.join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert_eq!(code(&["toy", "--set", "toy.mc_samples=100", "--out", s(&blocker)]), 2);
}

#[test]
fn train_writes_artifacts_and_manifest_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let o = quick_train(&a, &["--seed", "11"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["checkpoint.json", "loss_history.csv", "summary.json", "manifest.json", "config.toml"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let hist = std::fs::read_to_string(a.join("loss_history.csv")).unwrap();
    assert_eq!(hist.lines().next().unwrap(), "epoch,hedger_loss,generator_objective,validation_cost");
    assert_eq!(hist.lines().count(), 21);
    let m = json(&a.join("manifest.json"));
    assert_eq!(m["seed"], 11);
    assert_eq!(m["command"], "train");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);

    let b = dir.path().join("b");
    let o = run(&["train", "--config", s(&a.join("config.toml")), "--out", s(&b)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["checkpoint.json", "loss_history.csv", "config.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn adversarial_train_writes_snapshots_and_generator() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("adv");
    let o = quick_train(&a, &["--set", "simulator.model=\"adversarial\"", "--set", "train.snapshot_every=10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(a.join("generator.json").exists());
    assert!(a.join("checkpoint.json").exists());
    // Only improving snapshots are kept; the checkpoint is the last of them.
    let mut snaps: Vec<_> = std::fs::read_dir(a.join("snapshots")).unwrap().map(|e| e.unwrap().path()).collect();
    snaps.sort();
    let ck = json(&a.join("checkpoint.json"));
    assert!(!snaps.is_empty());
    assert_eq!(ck["role"], "hedger");
    assert_eq!(ck["epoch"], json(snaps.last().unwrap())["epoch"]);
    assert_eq!(json(&a.join("generator.json"))["role"], "generator");
}

#[test]
fn backtest_without_checkpoint_and_report_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = series_csv(dir.path(), 221);
    let out = dir.path().join("bt");
    assert_eq!(code(&["backtest", "--data", s(&csv), "--set", "backtest.strategies=[\"hedger\"]", "--out", s(&out)]), 1);
    let o = run(&["backtest", "--data", s(&csv), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: BacktestReport = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    // Disjoint windows of 21 closes.
    assert_eq!(rep.window_count, 10);
    let names: Vec<_> = rep.rows.iter().map(|r| r.strategy.as_str()).collect();
    assert_eq!(names, ["bs_delta", "zero_hedge"]);
    assert!(out.join("report.txt").exists() && out.join("histogram.csv").exists());
    let m = json(&out.join("manifest.json"));
    assert!(m["inputs"]["data"].as_str().unwrap().ends_with("TEST.csv"));
}

#[test]
fn checkpoint_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("t");
    assert!(quick_train(&ck, &[]).status.success());
    let csv = series_csv(dir.path(), 100);
    let ck = ck.join("checkpoint.json");
    let o = run(&["backtest", "--data", s(&csv), "--checkpoint", s(&ck), "--set", "option.maturity_steps=10",
                  "--out", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["backtest", "--data", s(&csv), "--checkpoint", s(&ck), "--out", s(&dir.path().join("y"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["eval", "--checkpoint", s(&ck), "--set", "eval.trials=2", "--out", s(&dir.path().join("e"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ev = json(&dir.path().join("e/eval.json"));
    assert_eq!(ev["rows"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("e/eval.txt").exists());
}

#[test]
fn toy_cases() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let erm10 = ["--set", "utility.kind=\"erm\"", "--set", "utility.lambda=10.0"];
    let (c1, c2, c3) = (d.join("c1"), d.join("c2"), d.join("c3"));

    let mut a = vec!["toy", "--case", "1", "--out", s(&c1)];
    a.extend(erm10);
    assert!(run(&a).status.success());
    let arg = json(&d.join("c1/summary.json"))["argmax_delta"].as_f64().unwrap();
    assert!((arg - 0.5).abs() <= 0.01, "{arg}");
    let sweep = std::fs::read_to_string(d.join("c1/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next().unwrap(), "delta,value");
    assert_eq!(sweep.lines().count(), 202);

    let mut a = vec!["toy", "--case", "3", "--set", "toy.mc_samples=20000", "--out", s(&c3)];
    a.extend(erm10);
    assert!(run(&a).status.success());
    let costs: Vec<f64> = json(&d.join("c3/summary.json"))["cost_at_half"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p[1].as_f64().unwrap())
        .collect();
    assert_eq!(costs.len(), 5);
    assert!(costs.windows(2).all(|w| w[1] > w[0]), "{costs:?}");

    let mut a = vec![
        "toy", "--case", "2", "--set", "toy.lr_hedger=0.0", "--set", "toy.lr_generator=0.0", "--set", "toy.cycles=5",
        "--set", "toy.trajectory_mc_samples=500", "--set", "toy.delta_steps=5", "--out", s(&c2),
    ];
    a.extend(erm10);
    let o = run(&a);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = std::fs::read_to_string(d.join("c2/trajectory.csv")).unwrap();
    let rows: Vec<&str> = traj.lines().skip(1).map(|l| l.split_once(',').unwrap().1).collect();
    assert!(rows.len() >= 2);
    assert!(rows.iter().all(|r| *r == rows[0]), "{rows:?}");
}
