use std::collections::{BTreeMap, HashMap, HashSet};

use super::message::{BlockId, MessageKind, Outgoing};
use super::Variant;
use crate::error::{Error, Result};
use crate::network::{NodeId, Region};

/// Per-node protocol state.
#[derive(Clone, Debug)]
pub struct NodeState {
    pub id: NodeId,
    pub region: Region,
    pub is_miner: bool,
    /// Connection list. Reshuffled in place before every broadcast.
    pub connections: Vec<NodeId>,
    pub known_blocks: HashSet<BlockId>,
    /// Blocks being fetched, with the peer they were requested from.
    pub pending: HashMap<BlockId, NodeId>,
    requested: HashSet<BlockId>,
    /// EWMA of observed one-way delay per neighbour, indexed by node id.
    pub latency_est: Vec<Option<f64>>,
    pub first_seen: BTreeMap<BlockId, f64>,
    best_tip: Option<(u32, BlockId)>,
}

/// What a node does in response to one delivered message.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Reaction {
    pub replies: Vec<Outgoing>,
    /// Set when the message completed a block this node did not know.
    pub learned: Option<BlockId>,
    pub anomalous: bool,
}

impl NodeState {
    pub fn new(id: NodeId, region: Region, is_miner: bool, connections: Vec<NodeId>, node_count: usize) -> Self {
        Self {
            id,
            region,
            is_miner,
            connections,
            known_blocks: HashSet::new(),
            pending: HashMap::new(),
            requested: HashSet::new(),
            latency_est: vec![None; node_count],
            first_seen: BTreeMap::new(),
            best_tip: None,
        }
    }

    pub fn knows(&self, block: BlockId) -> bool {
        self.known_blocks.contains(&block)
    }

    /// Highest block known, earliest-seen first on equal height.
    pub fn best_tip(&self) -> Option<BlockId> {
        self.best_tip.map(|(_, b)| b)
    }

    /// Marks `block` known. Returns false if it already was.
    pub fn learn(&mut self, block: BlockId, height: u32, now: f64) -> bool {
        if !self.known_blocks.insert(block) {
            return false;
        }
        self.pending.remove(&block);
        self.first_seen.insert(block, now);
        if self.best_tip.is_none_or(|(h, _)| height > h) {
            self.best_tip = Some((height, block));
        }
        true
    }

    /// `est <- (1 - alpha) * est + alpha * observed`; the first observation is
    /// taken as is.
    pub fn update_latency_estimate(&mut self, neighbor: NodeId, observed: f64, alpha: f64) -> Result<()> {
        if !(observed > 0.0 && observed.is_finite()) {
            return Err(Error::InvalidInput(format!("latency observation {observed}")));
        }
        let slot = &mut self.latency_est[neighbor];
        *slot = Some(match *slot {
            None => observed,
            Some(old) => (1.0 - alpha) * old + alpha * observed,
        });
        Ok(())
    }

    /// Protocol reaction to a delivered message. Learning a block is reported
    /// in the reaction; the caller performs the re-broadcast.
    pub fn handle_message(
        &mut self,
        kind: MessageKind,
        from: NodeId,
        now: f64,
        height_of: impl Fn(BlockId) -> u32,
    ) -> Reaction {
        let mut r = Reaction::default();
        match kind {
            MessageKind::FullBlock(b) => {
                if self.learn(b, height_of(b), now) {
                    r.learned = Some(b);
                }
            }
            MessageKind::HashAnnounce(b) => {
                if !self.knows(b) && !self.pending.contains_key(&b) {
                    self.pending.insert(b, from);
                    r.replies.push(Outgoing {
                        to: from,
                        kind: MessageKind::GetHeader(b),
                    });
                }
            }
            MessageKind::Inv(b) => {
                if !self.knows(b) && !self.pending.contains_key(&b) {
                    self.pending.insert(b, from);
                    self.requested.insert(b);
                    r.replies.push(Outgoing {
                        to: from,
                        kind: MessageKind::GetData(b),
                    });
                }
            }
            MessageKind::GetHeader(b) => {
                if self.knows(b) {
                    r.replies.push(Outgoing {
                        to: from,
                        kind: MessageKind::Header(b),
                    });
                } else {
                    r.anomalous = true;
                }
            }
            MessageKind::Header(b) => {
                if !self.knows(b) && self.pending.get(&b) == Some(&from) {
                    self.requested.insert(b);
                    r.replies.push(Outgoing {
                        to: from,
                        kind: MessageKind::GetBody(b),
                    });
                }
            }
            MessageKind::GetBody(b) => {
                if self.knows(b) {
                    r.replies.push(Outgoing {
                        to: from,
                        kind: MessageKind::Body(b),
                    });
                } else {
                    r.anomalous = true;
                }
            }
            MessageKind::GetData(b) => {
                if self.knows(b) {
                    r.replies.push(Outgoing {
                        to: from,
                        kind: MessageKind::FullBlock(b),
                    });
                } else {
                    r.anomalous = true;
                }
            }
            MessageKind::Body(b) => {
                if !self.requested.contains(&b) {
                    r.anomalous = true;
                } else if self.learn(b, height_of(b), now) {
                    r.learned = Some(b);
                }
            }
            MessageKind::Tx(_) => {}
        }
        r
    }
}

/// Number of full-block recipients for `n` connections: `floor(sqrt(n))`,
/// at least one when `n > 0`.
pub fn fanout(n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    n.isqrt().max(1)
}

/// Messages a node emits when relaying `block` in the given neighbour order.
pub fn broadcast_block(node: &NodeState, block: BlockId, order: &[NodeId], variant: Variant) -> Result<Vec<Outgoing>> {
    if !node.knows(block) {
        return Err(Error::Protocol(format!(
            "node {} broadcasting unknown block {:?}",
            node.id, block
        )));
    }
    if !is_permutation_of(order, &node.connections) {
        return Err(Error::Protocol(format!(
            "broadcast order of node {} is not a permutation of its connections",
            node.id
        )));
    }
    let out = match variant {
        Variant::Ethereum => {
            let k = fanout(order.len());
            order
                .iter()
                .enumerate()
                .map(|(i, &to)| Outgoing {
                    to,
                    kind: if i < k {
                        MessageKind::FullBlock(block)
                    } else {
                        MessageKind::HashAnnounce(block)
                    },
                })
                .collect()
        }
        Variant::Bitcoin => order
            .iter()
            .map(|&to| Outgoing {
                to,
                kind: MessageKind::Inv(block),
            })
            .collect(),
    };
    Ok(out)
}

fn is_permutation_of(order: &[NodeId], connections: &[NodeId]) -> bool {
    if order.len() != connections.len() {
        return false;
    }
    let mut a = order.to_vec();
    let mut b = connections.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    a == b
}
