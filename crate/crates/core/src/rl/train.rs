use std::collections::BTreeMap;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::{ActionMode, EpisodeOutcome, EpisodeSpec};
use super::policy::PolicyParams;
use super::ppo::{discounted_returns, gae_advantages, normalize_advantages, ppo_update, Adam, Hyperparams, Sample, Trajectory, UpdateStats};
use crate::engine::RngStream;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Anything that can play episodes against a ranking policy.
pub trait Environment<T>: Sync {
    /// Observation width the policy must accept.
    fn obs_width(&self) -> usize;

    fn run_episode(&self, params: &PolicyParams<T>, spec: EpisodeSpec, mode: ActionMode) -> Result<EpisodeOutcome<T>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub hyper: Hyperparams,
    pub iterations: usize,
    pub seed: u64,
    pub hidden: usize,
    pub init_log_std: f64,
    /// Every episode of a batch replays the same network seed.
    pub common_random_numbers: bool,
    /// Stop after the iteration that crosses this wall-clock budget.
    pub max_wall_s: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            hyper: Hyperparams::default(),
            iterations: 100,
            seed: 0,
            hidden: 16,
            init_log_std: 0.0,
            common_random_numbers: true,
            max_wall_s: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub mean_reward: f64,
    pub clip_fraction: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub log_std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T> {
    pub params: PolicyParams<T>,
    pub adam: Adam<T>,
    pub iteration: usize,
    pub curve: Vec<CurvePoint>,
}

impl<T: Scalar> TrainState<T> {
    pub fn new(width: usize, opts: &TrainOptions) -> Self {
        let mut rng = RngStream::derive(opts.seed, "train/init");
        let params = PolicyParams::init(opts.hidden, width, opts.init_log_std, &mut rng);
        let adam = Adam::new(params.len());
        Self {
            params,
            adam,
            iteration: 0,
            curve: Vec::new(),
        }
    }
}

/// Network and policy-noise seeds for one episode of one iteration.
pub fn episode_spec(opts: &TrainOptions, iteration: usize, episode: usize) -> EpisodeSpec {
    let mut r = RngStream::derive(opts.seed, &format!("train/iter/{iteration}"));
    let shared = r.next_u64();
    let seed = if opts.common_random_numbers {
        shared
    } else {
        r.child(&format!("ep/{episode}")).next_u64()
    };
    EpisodeSpec {
        seed,
        salt: (iteration as u64) << 20 | episode as u64,
        episode: episode as u32,
    }
}

/// Leave-one-out mean of the other episodes' rewards, zero for a single
/// episode.
pub fn leave_one_out_baselines(rewards: &[f64]) -> Vec<f64> {
    let n = rewards.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let total: f64 = rewards.iter().sum();
    rewards.iter().map(|r| (total - r) / (n - 1) as f64).collect()
}

/// Splits each episode into one trajectory per acting node, ending in the
/// episode reward, and flattens them into a PPO batch. With `center`, each
/// terminal reward has the leave-one-out batch mean subtracted; meant for
/// batches that replay one network seed.
pub fn build_trajectory<T: Scalar>(outcomes: &[EpisodeOutcome<T>], h: &Hyperparams, center: bool) -> Result<Trajectory<T>> {
    let gamma = T::lit(h.gamma);
    let lam = T::lit(h.lam);
    let rewards: Vec<f64> = outcomes.iter().map(|o| o.reward).collect();
    if let Some(e) = rewards.iter().position(|r| !r.is_finite()) {
        return Err(Error::NonFinite(format!("reward of episode {e}")));
    }
    let baselines = if center {
        leave_one_out_baselines(&rewards)
    } else {
        vec![0.0; rewards.len()]
    };
    let mut samples = Vec::new();
    for (e, out) in outcomes.iter().enumerate() {
        let mut per_node: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, r) in out.records.iter().enumerate() {
            per_node.entry(r.node).or_default().push(i);
        }
        for idx in per_node.values() {
            let n = idx.len();
            let mut rewards = vec![T::zero(); n];
            rewards[n - 1] = T::lit(out.reward - baselines[e]);
            let mut values: Vec<T> = idx.iter().map(|&i| out.records[i].value_est).collect();
            values.push(T::zero());
            let adv = gae_advantages(&rewards, &values, gamma, lam)?;
            let ret = discounted_returns(&rewards, gamma);
            for (k, &i) in idx.iter().enumerate() {
                let r = &out.records[i];
                samples.push(Sample {
                    observation: r.observation.clone(),
                    scores: r.scores.clone(),
                    old_log_prob: r.log_prob,
                    advantage: adv[k],
                    ret: ret[k],
                });
            }
        }
    }
    let mut adv: Vec<T> = samples.iter().map(|s| s.advantage).collect();
    normalize_advantages(&mut adv);
    for (s, a) in samples.iter_mut().zip(adv) {
        s.advantage = a;
    }
    Ok(Trajectory { samples })
}

/// Runs PPO iterations from `state` (or a fresh policy). `on_iteration` sees
/// the state after every update and may persist it.
pub fn train<T, E, F>(env: &E, opts: &TrainOptions, state: Option<TrainState<T>>, mut on_iteration: F) -> Result<TrainState<T>>
where
    T: Scalar,
    E: Environment<T>,
    F: FnMut(&TrainState<T>) -> Result<()>,
{
    opts.hyper.validate()?;
    let width = env.obs_width();
    let mut state = state.unwrap_or_else(|| TrainState::new(width, opts));
    if state.params.width() != width {
        return Err(Error::Config(format!(
            "policy observes {} slots, environment offers {}",
            state.params.width(),
            width
        )));
    }
    let started = Instant::now();
    while state.iteration < opts.iterations {
        let it = state.iteration;
        let params = &state.params;
        let outcomes = (0..opts.hyper.batch_episodes)
            .into_par_iter()
            .map(|e| env.run_episode(params, episode_spec(opts, it, e), ActionMode::Sample))
            .collect::<Result<Vec<_>>>()?;
        let mean_reward = outcomes.iter().map(|o| o.reward).sum::<f64>() / outcomes.len() as f64;
        let batch = build_trajectory(&outcomes, &opts.hyper, opts.common_random_numbers)?;
        // a seed that forges nothing in the horizon leaves nothing to learn from
        let stats = if batch.samples.is_empty() {
            UpdateStats::default()
        } else {
            let mut rng = RngStream::derive(opts.seed, &format!("train/ppo/{it}"));
            let (params, stats) = ppo_update(&state.params, &batch, &opts.hyper, &mut state.adam, &mut rng)?;
            state.params = params;
            stats
        };
        state.iteration += 1;
        state.curve.push(CurvePoint {
            iteration: state.iteration,
            mean_reward,
            clip_fraction: stats.clip_fraction,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            approx_kl: stats.approx_kl,
            log_std: state.params.log_std().to_f64_lossy(),
        });
        on_iteration(&state)?;
        if opts.max_wall_s.is_some_and(|b| started.elapsed().as_secs_f64() >= b) {
            break;
        }
    }
    Ok(state)
}
