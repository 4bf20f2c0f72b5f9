//! Block forging and the block-hash propagation scheme (Ethereum variant by
//! default, Bitcoin inv/getdata behind a flag), plus the transaction phase
//! that seeds each node's neighbour latency estimates.

mod message;
mod node;
mod world;

use serde::{Deserialize, Serialize};

pub use message::{Block, BlockId, Message, MessageKind, Outgoing, TxId};
pub use node::{broadcast_block, fanout, NodeState, Reaction};
pub use world::{
    schedule_forging, simulate, BroadcastOrder, EventKind, Learned, MessageRow, RunLog, RunOutput,
    RunSetup, ShuffleOrder,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Full block to the first `floor(sqrt(N))` neighbours, hash announcement
    /// to the rest; announced nodes fetch header then body.
    #[default]
    Ethereum,
    /// `inv` to every neighbour; unknown blocks are fetched with `getdata`.
    Bitcoin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub variant: Variant,
    pub block_bytes: u64,
    /// 32-byte hash plus 40-byte envelope.
    pub announce_bytes: u64,
    pub get_header_bytes: u64,
    pub header_bytes: u64,
    pub get_body_bytes: u64,
    pub tx_bytes: u64,
    pub forging_interval_s: f64,
    pub tx_rate_per_s: f64,
    /// Length of the transaction phase that precedes block propagation.
    pub tx_phase_s: f64,
    /// EWMA weight of a new latency observation.
    pub ewma_alpha: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Ethereum,
            block_bytes: 154_363,
            announce_bytes: 72,
            get_header_bytes: 600,
            header_bytes: 600,
            get_body_bytes: 72,
            tx_bytes: 250,
            forging_interval_s: 13.0,
            tx_rate_per_s: 100.0,
            tx_phase_s: 10.0,
            ewma_alpha: 0.3,
        }
    }
}

impl ProtocolConfig {
    pub fn body_bytes(&self) -> u64 {
        self.block_bytes.saturating_sub(self.header_bytes)
    }

    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error::Config;
        if !(self.forging_interval_s > 0.0 && self.forging_interval_s.is_finite()) {
            return Err(Config("forging_interval_s must be positive".into()));
        }
        if !(self.tx_rate_per_s > 0.0 && self.tx_rate_per_s.is_finite()) {
            return Err(Config("tx_rate_per_s must be positive".into()));
        }
        if !(self.tx_phase_s >= 0.0 && self.tx_phase_s.is_finite()) {
            return Err(Config("tx_phase_s must be non-negative".into()));
        }
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            return Err(Config("ewma_alpha must lie in (0, 1]".into()));
        }
        Ok(())
    }
}
