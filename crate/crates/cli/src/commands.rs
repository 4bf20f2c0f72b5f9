use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use bcast_core::config::{EnvironmentKind, ExperimentConfig};
use bcast_core::metrics::{carbon_estimate, compute_report, ecdf, summarize_experiment, ComparisonReport, Metric, SimReport};
use bcast_core::protocol::{simulate as run_sim, ShuffleOrder};
use bcast_core::rl::bandit::RankingBandit;
use bcast_core::rl::checkpoint::Checkpoint;
use bcast_core::rl::{paired_run, ActionMode, EpisodeSpec, Environment, NetworkEnv, PolicyOrder, TrainState, EVAL_SALT};
use bcast_core::PolicyParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{read_json, read_pairs_csv, write_ecdf_csv, write_events_gz, write_json, write_pairs_csv};
use crate::{manifest, plot, settings, Common, ModeArg};

struct Prepared {
    cfg: ExperimentConfig,
    out: PathBuf,
    pool: rayon::ThreadPool,
    started_at: String,
}

fn prepare(common: &Common) -> Result<Prepared> {
    let mut cfg = settings::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.experiment.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = common.workers {
        if w == 0 {
            bail!("--workers must be positive");
        }
        builder = builder.num_threads(w);
    }
    Ok(Prepared {
        cfg,
        out,
        pool: builder.build()?,
        started_at: manifest::now(),
    })
}

fn mode_of(arg: Option<ModeArg>, cfg: &ExperimentConfig) -> ActionMode {
    match arg {
        Some(ModeArg::Sample) => ActionMode::Sample,
        Some(ModeArg::Greedy) => ActionMode::Greedy,
        None => cfg.experiment.treated_mode,
    }
}

fn mode_name(m: ActionMode) -> &'static str {
    match m {
        ActionMode::Sample => "sample",
        ActionMode::Greedy => "greedy",
    }
}

fn load_params(path: &Path, width: usize) -> Result<PolicyParams> {
    let ck = Checkpoint::load(path)?;
    let p = ck.params::<f64>()?;
    if p.width() != width {
        bail!("checkpoint {} observes {} slots, topology needs {}", path.display(), p.width(), width);
    }
    Ok(p)
}

#[derive(Serialize, Deserialize)]
pub struct SimulateOutput {
    pub seed: u64,
    pub policy: String,
    pub mode: Option<String>,
    pub config_digest: String,
    pub events_processed: usize,
    pub event_digest: Option<String>,
    pub report: SimReport,
}

pub fn simulate(common: &Common, checkpoint: Option<&Path>, mode: Option<ModeArg>, event_log: bool) -> Result<()> {
    let p = prepare(common)?;
    let cfg = &p.cfg;
    let setup = cfg.run_setup()?;
    let seed = cfg.experiment.seed;
    let (out, policy, mode) = match checkpoint {
        None => (run_sim(&setup, seed, &mut ShuffleOrder, true)?, "shuffle".to_string(), None),
        Some(path) => {
            let params = load_params(path, setup.topology.max_degree())?;
            let mode = mode_of(mode, cfg);
            let spec = EpisodeSpec {
                seed,
                salt: EVAL_SALT,
                episode: 0,
            };
            let mut order = PolicyOrder::new(&params, mode, spec, cfg.rl.obs_cap_s, setup.topology.node_count(), false);
            let out = run_sim(&setup, seed, &mut order, true)?;
            (out, path.display().to_string(), Some(mode_name(mode).to_string()))
        }
    };
    let report = compute_report(&out.log, cfg.experiment.threshold);
    let result = SimulateOutput {
        seed,
        policy,
        mode,
        config_digest: cfg.digest(),
        events_processed: out.events_processed,
        event_digest: out.event_digest.clone(),
        report,
    };
    write_json(&p.out.join("report.json"), &result)?;
    let mut files = vec!["report.json".to_string()];
    if event_log {
        let rows = out.log.rows.as_deref().unwrap_or(&[]);
        write_events_gz(&p.out.join("events.csv.gz"), rows)?;
        files.push("events.csv.gz".into());
    }
    manifest::record(&p.out, "simulate", &result.config_digest, seed, p.started_at, &files)?;
    let r = &result.report;
    eprintln!(
        "seed {seed}: forged {} synchronized {} sync_time {} msgs/sync block {}",
        r.forged,
        r.synchronized,
        r.sync_time_s.map_or("-".into(), |v| format!("{v:.4} s")),
        r.msgs_per_sync_block.map_or("-".into(), |v| format!("{v:.1}")),
    );
    Ok(())
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    error: String,
    completed_iterations: usize,
    checkpoint: String,
    recent_curve: &'a [bcast_core::rl::CurvePoint],
}

#[derive(Serialize, Deserialize)]
pub struct TrainSummary {
    pub environment: EnvironmentKind,
    pub iterations: usize,
    pub final_mean_reward: Option<f64>,
    pub log_std: f64,
    /// Bandit only: share of fresh instances the greedy ranking solves.
    pub greedy_success_rate: Option<f64>,
}

fn run_training<E: Environment<f64>>(env: &E, p: &Prepared, ck_path: &Path, resume: bool) -> Result<TrainState<f64>> {
    let cfg = &p.cfg;
    let digest = cfg.digest();
    let start = if resume && ck_path.exists() {
        let ck = Checkpoint::load(ck_path)?;
        if ck.config_digest != digest {
            eprintln!("warning: {} was written under a different config", ck_path.display());
        }
        eprintln!("resuming at iteration {}", ck.iteration);
        Some(ck.into_state::<f64>()?)
    } else {
        None
    };
    let opts = cfg.train_options();
    let started = Instant::now();
    let mut last_curve = Vec::new();
    let result = p.pool.install(|| {
        bcast_core::rl::train(env, &opts, start, |s| {
            Checkpoint::from_state(s, &digest).save(ck_path)?;
            if let Some(c) = s.curve.last() {
                eprintln!(
                    "iter {:>4}  reward {:.4}  clip {:.3}  value_loss {:.4}  log_std {:+.3}  {:.0}s",
                    c.iteration,
                    c.mean_reward,
                    c.clip_fraction,
                    c.value_loss,
                    c.log_std,
                    started.elapsed().as_secs_f64()
                );
            }
            last_curve = s.curve[s.curve.len().saturating_sub(10)..].to_vec();
            Ok(())
        })
    });
    match result {
        Ok(s) => Ok(s),
        Err(e) => {
            let done = last_curve.last().map_or(0, |c| c.iteration);
            let diag = Diagnostic {
                error: e.to_string(),
                completed_iterations: done,
                checkpoint: ck_path.display().to_string(),
                recent_curve: &last_curve,
            };
            write_json(&p.out.join("diagnostic.json"), &diag)?;
            Err(anyhow!(e).context(format!(
                "training stopped after {done} iterations; diagnostics in {}",
                p.out.join("diagnostic.json").display()
            )))
        }
    }
}

pub fn train(common: &Common, checkpoint: Option<&Path>, iterations: Option<usize>, resume: bool) -> Result<()> {
    let mut p = prepare(common)?;
    if let Some(n) = iterations {
        p.cfg.rl.iterations = n;
    }
    let ck_path = checkpoint
        .map(Path::to_path_buf)
        .or_else(|| p.cfg.rl.checkpoint_path.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| p.out.join("checkpoint.json"));
    let (state, greedy) = match p.cfg.rl.environment {
        EnvironmentKind::Network => {
            let env = NetworkEnv {
                setup: p.cfg.run_setup()?,
                threshold: p.cfg.experiment.threshold,
                cap_s: p.cfg.rl.obs_cap_s,
            };
            (run_training(&env, &p, &ck_path, resume)?, None)
        }
        EnvironmentKind::Bandit => {
            let env = RankingBandit::new(p.cfg.rl.bandit.clone())?;
            let s = run_training(&env, &p, &ck_path, resume)?;
            let rate = env.greedy_success_rate(&s.params, p.cfg.experiment.seed ^ 0x5eed, 1000);
            (s, Some(rate))
        }
    };
    let curve_path = p.out.join("learning_curve.csv");
    let mut w = csv::Writer::from_path(&curve_path)?;
    w.write_record(["iteration", "mean_reward", "clip_fraction", "value_loss"])?;
    for c in &state.curve {
        w.write_record([
            c.iteration.to_string(),
            c.mean_reward.to_string(),
            c.clip_fraction.to_string(),
            c.value_loss.to_string(),
        ])?;
    }
    w.flush()?;
    let summary = TrainSummary {
        environment: p.cfg.rl.environment,
        iterations: state.iteration,
        final_mean_reward: state.curve.last().map(|c| c.mean_reward),
        log_std: state.params.log_std(),
        greedy_success_rate: greedy,
    };
    write_json(&p.out.join("train_summary.json"), &summary)?;
    let mut files = vec!["learning_curve.csv".to_string(), "train_summary.json".to_string()];
    if let Ok(rel) = ck_path.strip_prefix(&p.out) {
        files.push(rel.display().to_string());
    }
    manifest::record(&p.out, "train", &p.cfg.digest(), p.cfg.experiment.seed, p.started_at, &files)?;
    eprintln!("checkpoint: {}", ck_path.display());
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct EvaluationOutput {
    pub policy: String,
    pub mode: String,
    pub config_digest: String,
    pub comparison: ComparisonReport,
}

pub fn evaluate(common: &Common, checkpoint: Option<&Path>, untrained: bool, pairs: Option<usize>, mode: Option<ModeArg>) -> Result<()> {
    let p = prepare(common)?;
    let cfg = &p.cfg;
    let setup = cfg.run_setup()?;
    let width = setup.topology.max_degree();
    let (params, policy) = match (checkpoint, untrained) {
        (Some(path), false) => (load_params(path, width)?, path.display().to_string()),
        (None, true) => (TrainState::new(width, &cfg.train_options()).params, "untrained".to_string()),
        _ => bail!("pass exactly one of --checkpoint and --untrained"),
    };
    let k = pairs.unwrap_or(cfg.experiment.pairs);
    if k < 2 {
        bail!("at least 2 pairs are needed, got {k}");
    }
    let mode = mode_of(mode, cfg);
    let started = Instant::now();
    let runs = p.pool.install(|| {
        (0..k)
            .into_par_iter()
            .map(|i| {
                let r = paired_run(&params, &setup, cfg.pair_seed(i), mode, cfg.experiment.threshold, cfg.rl.obs_cap_s);
                if (i + 1) % 50 == 0 {
                    eprintln!("pair {} / {k}  {:.0}s", i + 1, started.elapsed().as_secs_f64());
                }
                r
            })
            .collect::<bcast_core::Result<Vec<_>>>()
    })?;
    let comparison = summarize_experiment(&runs, cfg.experiment.paired_test)?;
    write_pairs_csv(&p.out.join("pairs.csv"), &runs)?;
    write_ecdf_csv(&p.out.join("ecdf.csv"), &comparison)?;
    let output = EvaluationOutput {
        policy,
        mode: mode_name(mode).to_string(),
        config_digest: cfg.digest(),
        comparison,
    };
    write_json(&p.out.join("comparison.json"), &output)?;
    let files = ["pairs.csv", "ecdf.csv", "comparison.json"].map(String::from);
    manifest::record(&p.out, "evaluate", &output.config_digest, cfg.experiment.seed, p.started_at, &files)?;
    for m in Metric::ALL {
        let c = output.comparison.metric(m);
        eprintln!(
            "{:<20} baseline {:>10.4}  treated {:>10.4}  change {:>8} {}  p {:.4}",
            m.name(),
            c.baseline_mean,
            c.treated_mean,
            c.change.map_or("-".into(), |v| format!("{v:+.3}")),
            c.change_unit,
            c.p_value
        );
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct CarbonSummary {
    /// Baseline minus treated mean messages per synchronized block, floored at 0.
    pub messages_saved: f64,
    pub measured_difference: f64,
    pub per_message_gco2: f64,
    pub gco2_saved: f64,
    pub qos_per_message_gco2: f64,
    pub qos_gco2_saved: f64,
}

pub fn carbon_summary(model: &bcast_core::CarbonModel, baseline_msgs: f64, treated_msgs: f64) -> Result<CarbonSummary> {
    let diff = baseline_msgs - treated_msgs;
    let saved = diff.max(0.0);
    let qos = bcast_core::CarbonModel {
        per_byte_gco2: model.qos_per_byte_gco2,
        ..model.clone()
    };
    Ok(CarbonSummary {
        messages_saved: saved,
        measured_difference: diff,
        per_message_gco2: model.per_message_gco2(),
        gco2_saved: carbon_estimate(model, saved)?,
        qos_per_message_gco2: model.qos_per_message_gco2(),
        qos_gco2_saved: carbon_estimate(&qos, saved)?,
    })
}

pub fn report(dir: &Path, common: &Common) -> Result<()> {
    let inputs = ["comparison.json", "pairs.csv"];
    let missing: Vec<String> = inputs
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .map(|f| dir.join(f).display().to_string())
        .collect();
    if !missing.is_empty() {
        bail!("missing evaluation outputs:\n  {}", missing.join("\n  "));
    }
    let mut p = prepare(common)?;
    if common.out.is_none() {
        p.out = dir.to_path_buf();
    }
    let eval: EvaluationOutput = read_json(&dir.join("comparison.json"))?;
    let rows = read_pairs_csv(&dir.join("pairs.csv"))?;
    let mut files = Vec::new();
    for m in Metric::ALL {
        let value = |arm: &str| -> Vec<f64> {
            rows.iter()
                .filter(|r| r.arm == arm)
                .filter_map(|r| match m {
                    Metric::SyncTimeS => r.sync_time_s,
                    Metric::SyncRate => Some(r.sync_rate),
                    Metric::MsgsPerSyncBlock => r.msgs_per_sync_block,
                })
                .collect()
        };
        let base = ecdf(&value("baseline"))?;
        let treated = ecdf(&value("treated"))?;
        let name = format!("ecdf_{}.svg", m.name());
        plot::ecdf_svg(
            &p.out.join(&name),
            m.name(),
            m.name(),
            &[("baseline", &base.points), ("treated", &treated.points)],
        )?;
        files.push(name);
    }
    let msgs = eval.comparison.metric(Metric::MsgsPerSyncBlock);
    let carbon = carbon_summary(&p.cfg.carbon, msgs.baseline_mean, msgs.treated_mean)?;
    write_json(&p.out.join("carbon.json"), &carbon)?;
    files.push("carbon.json".into());
    manifest::record(&p.out, "report", &eval.config_digest, p.cfg.experiment.seed, p.started_at, &files)?;
    eprintln!(
        "{:.3} messages saved per synchronized block -> {:.3e} gCO2eq",
        carbon.messages_saved, carbon.gco2_saved
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn carbon_from_savings() {
        let m = bcast_core::CarbonModel::default();
        let c = carbon_summary(&m, 1000.0, 1000.0 - 485.125).unwrap();
        assert!((c.gco2_saved - 0.331).abs() < 1e-3);
        let none = carbon_summary(&m, 900.0, 950.0).unwrap();
        assert_eq!(none.gco2_saved, 0.0);
        assert_eq!(none.measured_difference, -50.0);
    }
}
