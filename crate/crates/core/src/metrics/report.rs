use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::protocol::{BlockId, RunLog};

/// The three run metrics plus raw counts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// Mean time from forging until the block reached the threshold, over
    /// synchronized blocks. `None` when no block synchronized.
    pub sync_time_s: Option<f64>,
    /// Synchronized blocks over forged blocks.
    pub sync_rate: f64,
    /// Messages emitted over synchronized blocks. `None` when no block synchronized.
    pub msgs_per_sync_block: Option<f64>,
    pub forged: u32,
    pub synchronized: u32,
    pub messages: u64,
    pub bytes: u64,
    pub tx_messages: u64,
    pub anomalies: u64,
    pub block_sync_times_s: Vec<f64>,
}

/// Nodes that must know a block for it to count as synchronized:
/// `ceil(threshold * node_count)`, at least one.
pub fn threshold_count(threshold: f64, node_count: usize) -> usize {
    let raw = threshold * node_count as f64;
    ((raw - 1e-9).ceil().max(1.0) as usize).min(node_count.max(1))
}

/// Instant each forged block first became known to the threshold count of
/// nodes (forger included), in forging order.
pub fn block_sync_instants(log: &RunLog, threshold: f64) -> Vec<(BlockId, Option<f64>)> {
    let need = threshold_count(threshold, log.node_count);
    let mut counts: HashMap<BlockId, usize> = HashMap::new();
    let mut synced_at: HashMap<BlockId, f64> = HashMap::new();
    for l in &log.learned {
        let c = counts.entry(l.block).or_insert(0);
        *c += 1;
        if *c == need {
            synced_at.insert(l.block, l.at);
        }
    }
    log.forged.iter().map(|b| (b.id, synced_at.get(&b.id).copied())).collect()
}

/// Derives the run metrics. A block is synchronized at the instant the
/// number of nodes knowing it (forger included) first reaches the
/// threshold count.
pub fn compute_report(log: &RunLog, threshold: f64) -> SimReport {
    let block_sync_times_s: Vec<f64> = block_sync_instants(log, threshold)
        .iter()
        .zip(&log.forged)
        .filter_map(|((_, t), b)| t.map(|t| t - b.forged_at))
        .collect();
    let forged = log.forged.len() as u32;
    let synchronized = block_sync_times_s.len() as u32;
    let (sync_time_s, msgs_per_sync_block) = if synchronized > 0 {
        (
            Some(block_sync_times_s.iter().sum::<f64>() / synchronized as f64),
            Some(log.messages as f64 / synchronized as f64),
        )
    } else {
        (None, None)
    };
    SimReport {
        sync_time_s,
        sync_rate: if forged > 0 {
            synchronized as f64 / forged as f64
        } else {
            0.0
        },
        msgs_per_sync_block,
        forged,
        synchronized,
        messages: log.messages,
        bytes: log.bytes,
        tx_messages: log.tx_messages,
        anomalies: log.anomalies,
        block_sync_times_s,
    }
}
