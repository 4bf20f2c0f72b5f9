use serde::{Deserialize, Serialize};

use super::policy::{sample_ranking, PolicyParams};
use super::train::Environment;
use crate::engine::RngStream;
use crate::error::{Error, Result};
use crate::metrics::{block_sync_instants, compute_report, PairedRun, SimReport};
use crate::network::NodeId;
use crate::protocol::{simulate, BlockId, BroadcastOrder, NodeState, RunSetup, ShuffleOrder};
use crate::scalar::Scalar;

/// Normalized latency estimates in connection-list order, padded to a fixed
/// width. Padded slots read 1.0 and are masked out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub latencies: Vec<T>,
    pub mask: Vec<bool>,
}

impl<T: Scalar> Observation<T> {
    /// Unmasked slots; they always form a prefix.
    pub fn degree(&self) -> usize {
        self.mask.iter().take_while(|m| **m).count()
    }

    pub fn width(&self) -> usize {
        self.latencies.len()
    }
}

/// A permutation of connection-list slots: `permutation[k]` is the slot
/// placed at position `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingAction {
    pub permutation: Vec<usize>,
}

impl RankingAction {
    pub fn identity(n: usize) -> Self {
        Self {
            permutation: (0..n).collect(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.permutation.len() != n {
            return Err(Error::Protocol(format!(
                "ranking of length {} for {} connections",
                self.permutation.len(),
                n
            )));
        }
        let mut seen = vec![false; n];
        for &i in &self.permutation {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Protocol("ranking is not a permutation".into()));
            }
        }
        Ok(())
    }
}

/// One broadcast decision.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord<T> {
    pub node: NodeId,
    pub observation: Observation<T>,
    /// Sampled per-slot scores the action was sorted from.
    pub scores: Vec<T>,
    pub action: RankingAction,
    pub log_prob: T,
    pub value_est: T,
    pub episode: u32,
    pub decision: u32,
    /// Block being broadcast and the simulated time of the decision.
    pub block: u32,
    pub at: f64,
}

/// Forging and synchronization instants of one block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockOutcome {
    pub block: u32,
    pub forged_at: f64,
    pub synced_at: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EpisodeOutcome<T> {
    pub records: Vec<StepRecord<T>>,
    /// Per-block instants; empty for synthetic environments.
    pub blocks: Vec<BlockOutcome>,
    /// `None` for synthetic environments without a simulator.
    pub report: Option<SimReport>,
    pub reward: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// Noisy scores; used while learning.
    Sample,
    /// Noise-free scores.
    #[default]
    Greedy,
}

/// Identifies one episode: `seed` drives the network, `salt` the policy noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeSpec {
    pub seed: u64,
    pub salt: u64,
    pub episode: u32,
}

pub fn observe<T: Scalar>(node: &NodeState, max_degree: usize, cap_s: f64) -> Observation<T> {
    let mut latencies = Vec::with_capacity(max_degree);
    let mut mask = Vec::with_capacity(max_degree);
    for &j in node.connections.iter().take(max_degree) {
        let est = node.latency_est[j].unwrap_or(cap_s);
        latencies.push(T::lit(est.min(cap_s) / cap_s));
        mask.push(true);
    }
    latencies.resize(max_degree, T::one());
    mask.resize(max_degree, false);
    Observation { latencies, mask }
}

pub fn apply_action(node: &NodeState, action: &RankingAction) -> Result<Vec<NodeId>> {
    action.validate(node.connections.len())?;
    Ok(action
        .permutation
        .iter()
        .map(|&slot| node.connections[slot])
        .collect())
}

/// Synchronized-blocks rate over synchronization time; zero when no block
/// synchronized.
pub fn episode_reward(report: &SimReport) -> f64 {
    match report.sync_time_s {
        Some(t) if t > 0.0 && report.synchronized > 0 => report.sync_rate / t,
        _ => 0.0,
    }
}

/// Queries the shared policy at every broadcast decision.
pub struct PolicyOrder<'p, T> {
    params: &'p PolicyParams<T>,
    mode: ActionMode,
    spec: EpisodeSpec,
    cap_s: f64,
    streams: Vec<Option<RngStream>>,
    collect: bool,
    pub records: Vec<StepRecord<T>>,
    decisions: u32,
}

impl<'p, T: Scalar> PolicyOrder<'p, T> {
    pub fn new(params: &'p PolicyParams<T>, mode: ActionMode, spec: EpisodeSpec, cap_s: f64, nodes: usize, collect: bool) -> Self {
        Self {
            params,
            mode,
            spec,
            cap_s,
            streams: vec![None; nodes],
            collect,
            records: Vec::new(),
            decisions: 0,
        }
    }

    pub fn decisions(&self) -> u32 {
        self.decisions
    }
}

impl<T: Scalar> BroadcastOrder for PolicyOrder<'_, T> {
    fn order(&mut self, node: &NodeState, block: BlockId, now: f64) -> Result<Vec<NodeId>> {
        if node.connections.len() > self.params.width() {
            return Err(Error::Config(format!(
                "node {} has {} connections but the policy observes {}",
                node.id,
                node.connections.len(),
                self.params.width()
            )));
        }
        let obs = observe::<T>(node, self.params.width(), self.cap_s);
        let ranking = match self.mode {
            ActionMode::Greedy => sample_ranking(self.params, &obs, None),
            ActionMode::Sample => {
                let (seed, salt) = (self.spec.seed, self.spec.salt);
                let stream = self.streams[node.id]
                    .get_or_insert_with(|| RngStream::derive(seed, &format!("policy/{salt}/node/{}", node.id)));
                sample_ranking(self.params, &obs, Some(stream))
            }
        };
        let order = apply_action(node, &ranking.action)?;
        if self.collect {
            self.records.push(StepRecord {
                node: node.id,
                observation: obs,
                scores: ranking.scores,
                action: ranking.action,
                log_prob: ranking.log_prob,
                value_est: ranking.value,
                episode: self.spec.episode,
                decision: self.decisions,
                block: block.0,
                at: now,
            });
        }
        self.decisions += 1;
        Ok(order)
    }
}

/// One fixed-duration simulation with the policy choosing every broadcast
/// order (forger and relays alike).
pub fn run_episode<T: Scalar>(
    params: &PolicyParams<T>,
    setup: &RunSetup,
    spec: EpisodeSpec,
    mode: ActionMode,
    threshold: f64,
    cap_s: f64,
) -> Result<EpisodeOutcome<T>> {
    let mut order = PolicyOrder::new(params, mode, spec, cap_s, setup.topology.node_count(), true);
    let out = simulate(setup, spec.seed, &mut order, false)?;
    let report = compute_report(&out.log, threshold);
    let blocks = block_sync_instants(&out.log, threshold)
        .into_iter()
        .zip(&out.log.forged)
        .map(|((id, synced_at), b)| BlockOutcome {
            block: id.0,
            forged_at: b.forged_at,
            synced_at,
        })
        .collect();
    let reward = episode_reward(&report);
    if !reward.is_finite() {
        return Err(Error::NonFinite(format!("episode reward {reward}")));
    }
    Ok(EpisodeOutcome {
        records: order.records,
        blocks,
        report: Some(report),
        reward,
    })
}

/// Policy-noise salt of evaluation runs; training salts never reach it.
pub const EVAL_SALT: u64 = u64::MAX;

/// Baseline shuffle and policy-ordered run under the same seed and topology.
pub fn paired_run<T: Scalar>(
    params: &PolicyParams<T>,
    setup: &RunSetup,
    seed: u64,
    mode: ActionMode,
    threshold: f64,
    cap_s: f64,
) -> Result<PairedRun> {
    let base = simulate(setup, seed, &mut ShuffleOrder, false)?;
    let spec = EpisodeSpec {
        seed,
        salt: EVAL_SALT,
        episode: 0,
    };
    let mut order = PolicyOrder::new(params, mode, spec, cap_s, setup.topology.node_count(), false);
    let treated = simulate(setup, seed, &mut order, false)?;
    Ok(PairedRun {
        seed,
        baseline: compute_report(&base.log, threshold),
        treated: compute_report(&treated.log, threshold),
    })
}

/// The block propagation simulator as a learning environment.
#[derive(Clone, Debug)]
pub struct NetworkEnv {
    pub setup: RunSetup,
    pub threshold: f64,
    pub cap_s: f64,
}

impl<T: Scalar> Environment<T> for NetworkEnv {
    fn obs_width(&self) -> usize {
        self.setup.topology.max_degree()
    }

    fn run_episode(&self, params: &PolicyParams<T>, spec: EpisodeSpec, mode: ActionMode) -> Result<EpisodeOutcome<T>> {
        run_episode(params, &self.setup, spec, mode, self.threshold, self.cap_s)
    }
}
