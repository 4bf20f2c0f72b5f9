//! Overlay topology and per-channel delay model.

use std::fmt;

use rand::seq::SliceRandom;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engine::RngStream;
use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    Ohio,
    Tokyo,
    Ireland,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Ohio, Region::Tokyo, Region::Ireland];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DegreeMode {
    /// Every node connects to every other node.
    Full,
    /// Circulant graph over a random node ordering: each node links to the
    /// `degree / 2` nodes on either side. `degree` must be even.
    Ring { degree: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub regions: Vec<Region>,
    pub nodes_per_region: usize,
    pub miner_fraction: f64,
    pub degree: DegreeMode,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            regions: Region::ALL.to_vec(),
            nodes_per_region: 50,
            miner_fraction: 0.5,
            degree: DegreeMode::Full,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDescriptor {
    pub id: NodeId,
    pub region: Region,
    pub is_miner: bool,
    /// Zero for non-miners; miner shares sum to one.
    pub hash_rate_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<NodeDescriptor>,
    /// Per-node connection list, in the base order drawn at build time.
    pub adjacency: Vec<Vec<NodeId>>,
}

impl Topology {
    /// Builds the overlay. Node ids are assigned region by region; miner
    /// selection and connection-list order come from `rng`.
    pub fn build(cfg: &TopologyConfig, rng: &mut RngStream) -> Result<Self> {
        if cfg.regions.is_empty() {
            return Err(Error::Config("at least one region is required".into()));
        }
        let mut seen = cfg.regions.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != cfg.regions.len() {
            return Err(Error::Config("regions must be distinct".into()));
        }
        if cfg.nodes_per_region < 2 {
            return Err(Error::Config(format!(
                "nodes_per_region must be at least 2, got {}",
                cfg.nodes_per_region
            )));
        }
        if !(cfg.miner_fraction > 0.0 && cfg.miner_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "miner_fraction must lie in (0, 1], got {}",
                cfg.miner_fraction
            )));
        }
        let miners_per_region = (cfg.miner_fraction * cfg.nodes_per_region as f64).round() as usize;
        if miners_per_region == 0 || miners_per_region > cfg.nodes_per_region {
            return Err(Error::Config(format!(
                "miner_fraction {} of {} nodes yields {} miners per region",
                cfg.miner_fraction, cfg.nodes_per_region, miners_per_region
            )));
        }

        let n = cfg.regions.len() * cfg.nodes_per_region;
        let total_miners = miners_per_region * cfg.regions.len();
        let share = 1.0 / total_miners as f64;
        let mut nodes = Vec::with_capacity(n);
        for (r, &region) in cfg.regions.iter().enumerate() {
            let mut slots: Vec<usize> = (0..cfg.nodes_per_region).collect();
            slots.shuffle(rng);
            let mut is_miner = vec![false; cfg.nodes_per_region];
            for &s in &slots[..miners_per_region] {
                is_miner[s] = true;
            }
            for (i, miner) in is_miner.into_iter().enumerate() {
                nodes.push(NodeDescriptor {
                    id: r * cfg.nodes_per_region + i,
                    region,
                    is_miner: miner,
                    hash_rate_share: if miner { share } else { 0.0 },
                });
            }
        }

        let mut adjacency: Vec<Vec<NodeId>> = match cfg.degree {
            DegreeMode::Full => (0..n)
                .map(|i| (0..n).filter(|&j| j != i).collect())
                .collect(),
            DegreeMode::Ring { degree } => {
                if degree == 0 || degree % 2 != 0 || degree >= n {
                    return Err(Error::Config(format!(
                        "ring degree must be even and in [2, {}), got {degree}",
                        n
                    )));
                }
                let mut order: Vec<NodeId> = (0..n).collect();
                order.shuffle(rng);
                let mut adj = vec![Vec::with_capacity(degree); n];
                for (pos, &node) in order.iter().enumerate() {
                    for off in 1..=degree / 2 {
                        adj[node].push(order[(pos + off) % n]);
                        adj[node].push(order[(pos + n - off) % n]);
                    }
                }
                adj
            }
        };
        for list in &mut adjacency {
            list.shuffle(rng);
        }
        Ok(Self { nodes, adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn region_of(&self, id: NodeId) -> Region {
        self.nodes[id].region
    }

    pub fn miners(&self) -> impl Iterator<Item = &NodeDescriptor> {
        self.nodes.iter().filter(|n| n.is_miner)
    }
}

/// How the processing-delay term enters the transmission delay.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessingMode {
    /// `size * (1/b + t_proc)`: processing cost per byte.
    #[default]
    PerByte,
    /// `size / b + t_proc`: one fixed cost per message.
    PerMessage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyPair {
    pub a: Region,
    pub b: Region,
    /// Median one-way latency in milliseconds.
    pub base_ms: f64,
    /// Overrides the global jitter for this pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_sigma: Option<f64>,
}

impl LatencyPair {
    fn new(a: Region, b: Region, base_ms: f64) -> Self {
        Self {
            a,
            b,
            base_ms,
            jitter_sigma: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyConfig {
    pub pairs: Vec<LatencyPair>,
    pub jitter_sigma: f64,
    pub bandwidth_bps: f64,
    pub t_proc_s: f64,
    pub processing: ProcessingMode,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        use Region::*;
        Self {
            pairs: vec![
                LatencyPair::new(Ohio, Ohio, 20.0),
                LatencyPair::new(Tokyo, Tokyo, 20.0),
                LatencyPair::new(Ireland, Ireland, 20.0),
                LatencyPair::new(Ohio, Ireland, 80.0),
                LatencyPair::new(Ohio, Tokyo, 150.0),
                LatencyPair::new(Ireland, Tokyo, 220.0),
            ],
            jitter_sigma: 0.25,
            bandwidth_bps: 1.25e6,
            t_proc_s: 0.0,
            processing: ProcessingMode::PerByte,
        }
    }
}

const R: usize = Region::ALL.len();

/// Region-pair log-normal latency plus the size-dependent transmission term.
#[derive(Clone, Debug, PartialEq)]
pub struct LatencyModel {
    base_s: [[Option<f64>; R]; R],
    sigma: [[f64; R]; R],
    pub bandwidth_bps: f64,
    pub t_proc_s: f64,
    pub processing: ProcessingMode,
}

impl LatencyModel {
    pub fn from_config(cfg: &LatencyConfig) -> Result<Self> {
        if !(cfg.bandwidth_bps > 0.0 && cfg.bandwidth_bps.is_finite()) {
            return Err(Error::Config("bandwidth_bps must be positive".into()));
        }
        if !(cfg.t_proc_s >= 0.0 && cfg.t_proc_s.is_finite()) {
            return Err(Error::Config("t_proc_s must be non-negative".into()));
        }
        check_sigma(cfg.jitter_sigma)?;
        let mut base_s = [[None; R]; R];
        let mut sigma = [[cfg.jitter_sigma; R]; R];
        for p in &cfg.pairs {
            if !(p.base_ms > 0.0 && p.base_ms.is_finite()) {
                return Err(Error::Config(format!(
                    "latency {}-{} must be positive, got {}",
                    p.a, p.b, p.base_ms
                )));
            }
            let (i, j) = (p.a.index(), p.b.index());
            if base_s[i][j].is_some() {
                return Err(Error::Config(format!("latency {}-{} given twice", p.a, p.b)));
            }
            base_s[i][j] = Some(p.base_ms / 1000.0);
            base_s[j][i] = Some(p.base_ms / 1000.0);
            let s = p.jitter_sigma.unwrap_or(cfg.jitter_sigma);
            check_sigma(s)?;
            sigma[i][j] = s;
            sigma[j][i] = s;
        }
        for a in 0..R {
            for b in 0..R {
                if a == b {
                    continue;
                }
                if let (Some(ab), Some(aa)) = (base_s[a][b], base_s[a][a]) {
                    if ab <= aa {
                        return Err(Error::Config(format!(
                            "inter-region latency {}-{} must exceed intra-region {}",
                            Region::ALL[a],
                            Region::ALL[b],
                            Region::ALL[a]
                        )));
                    }
                }
            }
        }
        Ok(Self {
            base_s,
            sigma,
            bandwidth_bps: cfg.bandwidth_bps,
            t_proc_s: cfg.t_proc_s,
            processing: cfg.processing,
        })
    }

    /// Median one-way latency in seconds.
    pub fn base_secs(&self, from: Region, to: Region) -> Result<f64> {
        self.base_s[from.index()][to.index()]
            .ok_or_else(|| Error::Config(format!("no latency configured for {from}-{to}")))
    }

    pub fn jitter_sigma(&self, from: Region, to: Region) -> f64 {
        self.sigma[from.index()][to.index()]
    }

    /// Checks that every pair among `regions` has a latency entry.
    pub fn covers(&self, regions: &[Region]) -> Result<()> {
        for &a in regions {
            for &b in regions {
                self.base_secs(a, b)?;
            }
        }
        Ok(())
    }

    /// Latency for a given standard-normal deviate `z`.
    pub fn latency_for(&self, from: Region, to: Region, z: f64) -> Result<f64> {
        Ok(self.base_secs(from, to)? * (self.jitter_sigma(from, to) * z).exp())
    }

    /// One log-normal draw: `base * exp(sigma * z)`, `z ~ N(0, 1)`.
    pub fn sample_latency<G: RngCore + ?Sized>(&self, from: Region, to: Region, rng: &mut G) -> Result<f64> {
        let z: f64 = StandardNormal.sample(rng);
        self.latency_for(from, to, z)
    }

    /// `l + size * (1/b + t_proc)`, or `l + size/b + t_proc` when processing
    /// is charged per message.
    pub fn transmission_delay(&self, size_bytes: u64, latency_s: f64) -> f64 {
        let size = size_bytes as f64;
        match self.processing {
            ProcessingMode::PerByte => latency_s + size * (1.0 / self.bandwidth_bps + self.t_proc_s),
            ProcessingMode::PerMessage => latency_s + size / self.bandwidth_bps + self.t_proc_s,
        }
    }

    /// Strict lower bound on delivering `payload_bytes` over one hop
    /// (latency is always positive).
    pub fn min_one_hop_delay(&self, payload_bytes: u64) -> f64 {
        self.transmission_delay(payload_bytes, 0.0)
    }

    /// Smallest configured median latency.
    pub fn min_base_secs(&self) -> f64 {
        self.base_s
            .iter()
            .flatten()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_sigma(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("jitter sigma must be non-negative, got {s}")))
    }
}
