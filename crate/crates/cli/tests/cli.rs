use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bcast_core::config::ExperimentConfig;
use bcast_core::rl::checkpoint::Checkpoint;
use bcast_core::rl::{PolicyParams, TrainOptions, TrainState};
use serde_json::Value;
use tempfile::TempDir;

fn bcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcast")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = bcast(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, body).unwrap();
    p
}

const BANDIT: &str = "[rl]\nenvironment = \"bandit\"\n";

#[test]
fn simulate_is_deterministic_and_writes_defaults() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("fresh.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        ok(&["simulate", "--config", s(&cfg), "--seed", "3", "--out", s(out), "--event-log"]);
    }
    let text = fs::read_to_string(&cfg).unwrap();
    let parsed: ExperimentConfig = toml::from_str(&text).unwrap();
    assert_eq!(parsed, ExperimentConfig::default());
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    assert!(a.join("events.csv.gz").exists());
    let r = json(&a.join("report.json"));
    let rate = r["report"]["sync_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    let m = json(&a.join("manifest.json"));
    assert_eq!(m["entries"].as_array().unwrap().len(), 1);
}

#[test]
fn exit_codes() {
    assert_eq!(bcast(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bcast(&["evaluate"]).status.code(), Some(1));
    assert_eq!(bcast(&["--help"]).status.code(), Some(0));
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nothing");
    let out = bcast(&["report", s(&missing), "--out", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("comparison.json") && err.contains("pairs.csv"), "{err}");
    let bad = write_config(tmp.path(), "[experiment]\nthreshold = 2.0\n");
    assert_eq!(bcast(&["simulate", "--config", s(&bad), "--out", s(tmp.path())]).status.code(), Some(2));
    let ck = tmp.path().join("absent.json");
    let out = bcast(&["evaluate", "--checkpoint", s(&ck), "--pairs", "2", "--out", s(tmp.path()), "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_checkpoint_round_trip_and_resume() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BANDIT);
    let out = tmp.path().join("run");
    let ck = out.join("checkpoint.json");
    ok(&["train", "--config", s(&cfg), "--out", s(&out), "--iterations", "1"]);
    let first = Checkpoint::load(&ck).unwrap();
    assert_eq!(first.iteration, 1);
    let state: TrainState<f64> = first.into_state().unwrap();
    assert_eq!(Checkpoint::from_state(&state, &first.config_digest), first);

    ok(&["train", "--config", s(&cfg), "--out", s(&out), "--iterations", "3", "--resume"]);
    let resumed = Checkpoint::load(&ck).unwrap();
    assert_eq!(resumed.iteration, 3);
    let iters: Vec<usize> = resumed.curve.iter().map(|c| c.iteration).collect();
    assert_eq!(iters, vec![1, 2, 3]);
    assert_eq!(resumed.curve[0], first.curve[0]);
    let csv = fs::read_to_string(out.join("learning_curve.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("iteration,mean_reward,clip_fraction,value_loss"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn bandit_training_reaches_high_reward() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BANDIT);
    ok(&["train", "--config", s(&cfg), "--out", s(tmp.path()), "--iterations", "200", "--seed", "11"]);
    let summary = json(&tmp.path().join("train_summary.json"));
    let last = summary["final_mean_reward"].as_f64().unwrap();
    assert!(last >= 0.95, "{last}");
    assert!(summary["greedy_success_rate"].as_f64().unwrap() >= 0.95);
}

#[test]
fn evaluate_and_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("eval");
    ok(&["evaluate", "--untrained", "--pairs", "2", "--config", s(&cfg), "--out", s(&out), "--workers", "1"]);
    let rows = fs::read_to_string(out.join("pairs.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4);
    let cmp = json(&out.join("comparison.json"));
    assert_eq!(cmp["comparison"]["metrics"].as_array().unwrap().len(), 3);
    ok(&["report", s(&out), "--config", s(&cfg), "--out", s(&out)]);
    for m in ["sync_time_s", "sync_rate", "msgs_per_sync_block"] {
        let svg = fs::read_to_string(out.join(format!("ecdf_{m}.svg"))).unwrap();
        assert!(svg.starts_with("<svg"));
    }
    assert!(out.join("carbon.json").exists());
    let manifest = json(&out.join("manifest.json"));
    let commands: Vec<&str> = manifest["entries"].as_array().unwrap().iter().map(|e| e["command"].as_str().unwrap()).collect();
    assert_eq!(commands, ["evaluate", "report"]);
}

fn set_message_means(dir: &Path, baseline: f64, treated: f64) {
    let path = dir.join("comparison.json");
    let mut v = json(&path);
    for m in v["comparison"]["metrics"].as_array_mut().unwrap() {
        if m["metric"] == "msgs_per_sync_block" {
            m["baseline_mean"] = baseline.into();
            m["treated_mean"] = treated.into();
        }
    }
    fs::write(&path, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
}

#[test]
fn carbon_from_synthetic_results() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("eval");
    ok(&["evaluate", "--untrained", "--pairs", "2", "--config", s(&cfg), "--out", s(&out)]);
    set_message_means(&out, 20_000.0, 20_000.0 - 485.125);
    ok(&["report", s(&out), "--config", s(&cfg), "--out", s(&out)]);
    let c = json(&out.join("carbon.json"));
    assert!((c["gco2_saved"].as_f64().unwrap() - 0.331).abs() <= 0.001);
    set_message_means(&out, 20_000.0, 20_000.0);
    ok(&["report", s(&out), "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(json(&out.join("carbon.json"))["gco2_saved"].as_f64(), Some(0.0));
}

#[test]
fn zeroed_greedy_checkpoint_reproduces_baseline() {
    let tmp = TempDir::new().unwrap();
    let cfg_path = write_config(tmp.path(), "[experiment]\nduration_s = 30.0\n");
    let cfg: ExperimentConfig = toml::from_str(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    let width = cfg.run_setup().unwrap().topology.max_degree();
    let mut state = TrainState::<f64>::new(width, &TrainOptions::default());
    state.params = PolicyParams::zeroed(state.params.hidden(), width, 0.0);
    let ck = tmp.path().join("zero.json");
    Checkpoint::from_state(&state, &cfg.digest()).save(&ck).unwrap();
    let (a, b) = (tmp.path().join("base"), tmp.path().join("zero"));
    ok(&["simulate", "--config", s(&cfg_path), "--seed", "8", "--out", s(&a)]);
    ok(&["simulate", "--config", s(&cfg_path), "--seed", "8", "--out", s(&b), "--checkpoint", s(&ck), "--mode", "greedy"]);
    assert_eq!(json(&a.join("report.json"))["report"], json(&b.join("report.json"))["report"]);
}
