//! Experiment configuration. Every section has defaults so a partial file
//! (or none at all) is valid.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::RngStream;
use crate::error::{Error, Result};
use crate::metrics::CarbonModel;
use crate::network::{LatencyConfig, LatencyModel, Topology, TopologyConfig};
use crate::protocol::{ProtocolConfig, RunSetup};
use crate::rl::bandit::BanditConfig;
use crate::rl::ppo::Hyperparams;
use crate::rl::{ActionMode, TrainOptions};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    #[default]
    Network,
    Bandit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    pub environment: EnvironmentKind,
    /// Latency estimates are clipped to this and divided by it.
    pub obs_cap_s: f64,
    pub hidden: usize,
    /// Starting score noise. Small values let the fixed learning rate
    /// move the ranking appreciably per update.
    pub init_log_std: f64,
    pub iterations: usize,
    pub max_wall_s: Option<f64>,
    pub common_random_numbers: bool,
    pub checkpoint_path: Option<String>,
    pub hyper: Hyperparams,
    pub bandit: BanditConfig,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            environment: EnvironmentKind::Network,
            obs_cap_s: 1.0,
            hidden: 4,
            init_log_std: -3.0,
            iterations: 1500,
            max_wall_s: Some(7200.0),
            common_random_numbers: true,
            checkpoint_path: None,
            hyper: Hyperparams::default(),
            bandit: BanditConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub pairs: usize,
    /// Length of the block phase of each run.
    pub duration_s: f64,
    pub seed: u64,
    /// Seeds the topology shared by every run of the experiment.
    pub topology_seed: u64,
    /// Fraction of nodes that must know a block for it to count as synchronized.
    pub threshold: f64,
    /// Policy noise in the treated arm; the greedy sort collapses every
    /// full-block recipient into one latency class.
    pub treated_mode: ActionMode,
    /// Signed-rank test on paired differences instead of the rank-sum test.
    pub paired_test: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            pairs: 1000,
            duration_s: 60.0,
            seed: 1,
            topology_seed: 7,
            threshold: 0.5,
            treated_mode: ActionMode::Sample,
            paired_test: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub latency: LatencyConfig,
    pub protocol: ProtocolConfig,
    pub rl: RlConfig,
    pub experiment: ExperimentSection,
    pub carbon: CarbonModel<f64>,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            topology: TopologyConfig::default(),
            latency: LatencyConfig::default(),
            protocol: ProtocolConfig::default(),
            rl: RlConfig::default(),
            experiment: ExperimentSection::default(),
            carbon: CarbonModel::default(),
            output_dir: "results".into(),
        }
    }
}

impl ExperimentConfig {
    /// Network seed of the `i`-th evaluation pair.
    pub fn pair_seed(&self, i: usize) -> u64 {
        use rand::RngCore;
        RngStream::derive(self.experiment.seed, &format!("pair/{i}")).next_u64()
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        self.rl.hyper.validate()?;
        let e = &self.experiment;
        if !(e.threshold > 0.0 && e.threshold <= 1.0) {
            return Err(Error::Config("threshold must lie in (0, 1]".into()));
        }
        if !(e.duration_s > 0.0 && e.duration_s.is_finite()) {
            return Err(Error::Config("duration_s must be positive".into()));
        }
        if !(self.rl.obs_cap_s > 0.0 && self.rl.obs_cap_s.is_finite()) {
            return Err(Error::Config("obs_cap_s must be positive".into()));
        }
        if self.rl.hidden == 0 {
            return Err(Error::Config("hidden must be positive".into()));
        }
        Ok(())
    }

    /// Builds the shared topology and latency model.
    pub fn run_setup(&self) -> Result<RunSetup> {
        self.validate()?;
        let mut rng = RngStream::derive(self.experiment.topology_seed, "topology");
        let setup = RunSetup {
            topology: Topology::build(&self.topology, &mut rng)?,
            latency: LatencyModel::from_config(&self.latency)?,
            protocol: self.protocol.clone(),
            duration_s: self.experiment.duration_s,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            hyper: self.rl.hyper.clone(),
            iterations: self.rl.iterations,
            seed: self.experiment.seed,
            hidden: self.rl.hidden,
            init_log_std: self.rl.init_log_std,
            common_random_numbers: self.rl.common_random_numbers,
            max_wall_s: self.rl.max_wall_s,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let d = Sha256::digest(&json);
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build() {
        let cfg = ExperimentConfig::default();
        let setup = cfg.run_setup().unwrap();
        assert_eq!(setup.topology.node_count(), 150);
        assert_eq!(setup.topology.max_degree(), 149);
        assert_eq!(setup.topology.miners().count(), 75);
    }

    #[test]
    fn digest_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.experiment.seed += 1;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn json_round_trip() {
        let a = ExperimentConfig::default();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a, back);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"experiment":{"pairs":5}}"#).unwrap();
        assert_eq!(partial.experiment.pairs, 5);
        assert_eq!(partial.rl.hidden, RlConfig::default().hidden);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment":{"pears":5}}"#).is_err());
    }

    #[test]
    fn bad_threshold() {
        let mut c = ExperimentConfig::default();
        c.experiment.threshold = 0.0;
        assert!(c.validate().is_err());
    }
}
