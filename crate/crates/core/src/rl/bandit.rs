//! A one-step ranking task with a known answer: one of the slots is fast and
//! the reward is 1 when that slot is ranked first.

use rand::Rng;

use super::env::{ActionMode, EpisodeOutcome, EpisodeSpec, Observation, StepRecord};
use super::policy::{sample_ranking, PolicyParams};
use super::train::Environment;
use crate::engine::RngStream;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditConfig {
    pub slots: usize,
    pub fast_latency: f64,
    pub slow_latency: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            slots: 5,
            fast_latency: 0.05,
            slow_latency: 0.5,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RankingBandit {
    pub cfg: BanditConfig,
}

impl RankingBandit {
    pub fn new(cfg: BanditConfig) -> Result<Self> {
        if cfg.slots < 2 || !(cfg.fast_latency < cfg.slow_latency) {
            return Err(Error::Config("bandit needs two or more slots and fast < slow".into()));
        }
        Ok(Self { cfg })
    }

    /// Observation and fast slot for an episode seed.
    pub fn instance<T: Scalar>(&self, seed: u64) -> (Observation<T>, usize) {
        let mut rng = RngStream::derive(seed, "bandit");
        let fast = rng.random_range(0..self.cfg.slots);
        let latencies = (0..self.cfg.slots)
            .map(|i| T::lit(if i == fast { self.cfg.fast_latency } else { self.cfg.slow_latency }))
            .collect();
        let mask = vec![true; self.cfg.slots];
        (Observation { latencies, mask }, fast)
    }

    /// Fraction of `n` fresh instances on which the noise-free ranking puts
    /// the fast slot first.
    pub fn greedy_success_rate<T: Scalar>(&self, params: &PolicyParams<T>, seed: u64, n: usize) -> f64 {
        let hits = (0..n)
            .filter(|&i| {
                let (obs, fast) = self.instance::<T>(seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                sample_ranking(params, &obs, None).action.permutation[0] == fast
            })
            .count();
        hits as f64 / n as f64
    }
}

impl<T: Scalar> Environment<T> for RankingBandit {
    fn obs_width(&self) -> usize {
        self.cfg.slots
    }

    fn run_episode(&self, params: &PolicyParams<T>, spec: EpisodeSpec, mode: ActionMode) -> Result<EpisodeOutcome<T>> {
        let (obs, fast) = self.instance::<T>(spec.seed ^ spec.salt.wrapping_mul(0xD1B5_4A32_D192_ED03));
        let mut noise = RngStream::derive(spec.seed, &format!("policy/{}/bandit", spec.salt));
        let ranking = match mode {
            ActionMode::Sample => sample_ranking(params, &obs, Some(&mut noise)),
            ActionMode::Greedy => sample_ranking(params, &obs, None),
        };
        let reward = if ranking.action.permutation[0] == fast { 1.0 } else { 0.0 };
        Ok(EpisodeOutcome {
            records: vec![StepRecord {
                node: 0,
                observation: obs,
                scores: ranking.scores,
                action: ranking.action,
                log_prob: ranking.log_prob,
                value_est: ranking.value,
                episode: spec.episode,
                decision: 0,
                block: 0,
                at: 0.0,
            }],
            blocks: Vec::new(),
            report: None,
            reward,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_slot_is_unique() {
        let b = RankingBandit::default();
        for s in 0..50 {
            let (obs, fast) = b.instance::<f64>(s);
            assert_eq!(obs.latencies.iter().filter(|l| **l == 0.05).count(), 1);
            assert_eq!(obs.latencies[fast], 0.05);
        }
    }

    #[test]
    fn fresh_policy_is_at_chance() {
        let b = RankingBandit::default();
        let p = PolicyParams::<f64>::zeroed(4, 5, 0.0);
        // all-zero scores rank slot 0 first
        let rate = b.greedy_success_rate(&p, 1, 2000);
        assert!((rate - 0.2).abs() < 0.04, "{rate}");
    }
}
