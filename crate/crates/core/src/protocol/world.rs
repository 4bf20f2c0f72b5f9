use serde::{Deserialize, Serialize};

use super::message::{Block, BlockId, Message, MessageKind, Outgoing, TxId};
use super::node::{broadcast_block, NodeState};
use super::ProtocolConfig;
use crate::engine::{Event, EventPayload, EventQueue, KeyedNormals, RngStream, SimTime};
use crate::error::{Error, Result};
use crate::network::{LatencyModel, NodeId, Topology};

use rand::seq::SliceRandom;

/// Chooses the neighbour order for a broadcast.
///
/// Called right after `node.connections` has been freshly shuffled; the
/// returned order must be a permutation of it.
pub trait BroadcastOrder {
    fn order(&mut self, node: &NodeState, block: BlockId, now: f64) -> Result<Vec<NodeId>>;
}

/// The default protocol: keep the random shuffle.
#[derive(Clone, Copy, Debug, Default)]
pub struct ShuffleOrder;

impl BroadcastOrder for ShuffleOrder {
    fn order(&mut self, node: &NodeState, _block: BlockId, _now: f64) -> Result<Vec<NodeId>> {
        Ok(node.connections.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    TxInjected { origin: NodeId },
    TxArrival(Message),
    BlockForged { forger: NodeId },
    MessageArrival(Message),
    SimulationEnd,
}

impl EventPayload for EventKind {
    fn simulation_end() -> Self {
        EventKind::SimulationEnd
    }

    fn is_simulation_end(&self) -> bool {
        matches!(self, EventKind::SimulationEnd)
    }
}

/// Everything a run needs besides its seed and ordering policy.
#[derive(Clone, Debug)]
pub struct RunSetup {
    pub topology: Topology,
    pub latency: LatencyModel,
    pub protocol: ProtocolConfig,
    /// Length of the block propagation phase.
    pub duration_s: f64,
}

impl RunSetup {
    pub fn block_phase_start(&self) -> f64 {
        self.protocol.tx_phase_s
    }

    pub fn t_end(&self) -> f64 {
        self.protocol.tx_phase_s + self.duration_s
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Config("duration_s must be positive".into()));
        }
        let regions: Vec<_> = {
            let mut r: Vec<_> = self.topology.nodes.iter().map(|n| n.region).collect();
            r.sort();
            r.dedup();
            r
        };
        self.latency.covers(&regions)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Learned {
    pub block: BlockId,
    pub node: NodeId,
    pub at: f64,
}

/// One row of the optional per-message log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageRow {
    pub kind: &'static str,
    pub block: Option<u32>,
    pub from: NodeId,
    pub to: NodeId,
    pub bytes: u64,
    pub sent_at: f64,
    pub arrive_at: f64,
}

/// What a run produced, in the form the metrics consume.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub node_count: usize,
    pub t_end: f64,
    pub forged: Vec<Block>,
    /// First time each node knew each forged block, in time order.
    pub learned: Vec<Learned>,
    /// Block propagation messages emitted (transaction traffic excluded).
    pub messages: u64,
    pub bytes: u64,
    pub by_kind: [u64; 9],
    pub tx_messages: u64,
    pub anomalies: u64,
    pub broadcasts: u64,
    pub rows: Option<Vec<MessageRow>>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub log: RunLog,
    pub events_processed: usize,
    /// Digest of the full event sequence when the run was recorded.
    pub event_digest: Option<String>,
}

/// Poisson block arrivals over `[start, end)` with mean gap `interval_s`;
/// each forger is drawn in proportion to its hash-rate share.
pub fn schedule_forging(
    topology: &Topology,
    interval_s: f64,
    start: f64,
    end: f64,
    rng: &mut RngStream,
) -> Result<Vec<(f64, NodeId)>> {
    let miners: Vec<(NodeId, f64)> = topology
        .miners()
        .map(|m| (m.id, m.hash_rate_share))
        .collect();
    if miners.is_empty() {
        return Err(Error::Config("no miners in topology".into()));
    }
    let total: f64 = miners.iter().map(|m| m.1).sum();
    let mut out = Vec::new();
    let mut t = start;
    loop {
        t += -(1.0 - rng.uniform()).ln() * interval_s;
        if t >= end {
            break;
        }
        let mut x = rng.uniform() * total;
        let mut forger = miners[miners.len() - 1].0;
        for &(id, share) in &miners {
            if x < share {
                forger = id;
                break;
            }
            x -= share;
        }
        out.push((t, forger));
    }
    Ok(out)
}

fn poisson_times(rate: f64, start: f64, end: f64, rng: &mut RngStream) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = start;
    loop {
        t += -(1.0 - rng.uniform()).ln() / rate;
        if t >= end {
            return out;
        }
        out.push(t);
    }
}

struct World<'a, O: BroadcastOrder> {
    setup: &'a RunSetup,
    nodes: Vec<NodeState>,
    blocks: Vec<Block>,
    channel_noise: KeyedNormals,
    order_rngs: Vec<RngStream>,
    orderer: &'a mut O,
    log: RunLog,
    next_tx: u32,
}

impl<O: BroadcastOrder> World<'_, O> {
    fn send(&mut self, q: &mut EventQueue<EventKind>, from: NodeId, out: Outgoing) -> Result<()> {
        let n = self.nodes.len();
        let now = q.now().secs();
        let bytes = out.kind.wire_bytes(&self.setup.protocol);
        let z = self.channel_noise.draw(from * n + out.to);
        let latency = self.setup.latency.latency_for(
            self.nodes[from].region,
            self.nodes[out.to].region,
            z,
        )?;
        let delay = self.setup.latency.transmission_delay(bytes, latency);
        let msg = Message {
            kind: out.kind,
            from,
            to: out.to,
            bytes,
            sent_at: now,
        };
        if let MessageKind::Tx(_) = out.kind {
            self.log.tx_messages += 1;
            q.schedule_in(delay, EventKind::TxArrival(msg))?;
            return Ok(());
        }
        self.log.messages += 1;
        self.log.bytes += bytes;
        self.log.by_kind[out.kind.index()] += 1;
        if let Some(rows) = self.log.rows.as_mut() {
            rows.push(MessageRow {
                kind: out.kind.name(),
                block: out.kind.block().map(|b| b.0),
                from,
                to: out.to,
                bytes,
                sent_at: now,
                arrive_at: now + delay,
            });
        }
        q.schedule_in(delay, EventKind::MessageArrival(msg))?;
        Ok(())
    }

    fn learned(&mut self, node: NodeId, block: BlockId, now: f64) {
        self.log.learned.push(Learned { block, node, at: now });
    }

    fn broadcast(&mut self, q: &mut EventQueue<EventKind>, id: NodeId, block: BlockId) -> Result<()> {
        let now = q.now().secs();
        let node = &mut self.nodes[id];
        node.connections.shuffle(&mut self.order_rngs[id]);
        let order = self.orderer.order(&self.nodes[id], block, now)?;
        let out = broadcast_block(&self.nodes[id], block, &order, self.setup.protocol.variant)?;
        self.log.broadcasts += 1;
        for o in out {
            self.send(q, id, o)?;
        }
        Ok(())
    }

    fn handle(&mut self, q: &mut EventQueue<EventKind>, e: &Event<EventKind>) -> Result<()> {
        let now = e.at.secs();
        match &e.kind {
            EventKind::TxInjected { origin } => {
                let tx = TxId(self.next_tx);
                self.next_tx += 1;
                let targets = self.nodes[*origin].connections.clone();
                for to in targets {
                    self.send(q, *origin, Outgoing { to, kind: MessageKind::Tx(tx) })?;
                }
            }
            EventKind::TxArrival(m) => {
                let observed = now - m.sent_at;
                let alpha = self.setup.protocol.ewma_alpha;
                self.nodes[m.to].update_latency_estimate(m.from, observed, alpha)?;
            }
            EventKind::BlockForged { forger } => {
                let parent = self.nodes[*forger].best_tip().expect("genesis is known");
                let block = Block {
                    id: BlockId(self.blocks.len() as u32),
                    parent: Some(parent),
                    height: self.blocks[parent.0 as usize].height + 1,
                    forger: *forger,
                    size: self.setup.protocol.block_bytes,
                    forged_at: now,
                };
                let id = block.id;
                self.nodes[*forger].learn(id, block.height, now);
                self.log.forged.push(block.clone());
                self.blocks.push(block);
                self.learned(*forger, id, now);
                self.broadcast(q, *forger, id)?;
            }
            EventKind::MessageArrival(m) => {
                let blocks = &self.blocks;
                let reaction = self.nodes[m.to].handle_message(m.kind, m.from, now, |b| {
                    blocks[b.0 as usize].height
                });
                if reaction.anomalous {
                    self.log.anomalies += 1;
                }
                for reply in reaction.replies {
                    self.send(q, m.to, reply)?;
                }
                if let Some(b) = reaction.learned {
                    self.learned(m.to, b, now);
                    self.broadcast(q, m.to, b)?;
                }
            }
            EventKind::SimulationEnd => {}
        }
        Ok(())
    }
}

/// Runs one simulation: a transaction phase over `[0, tx_phase_s)`, then
/// block forging and propagation until `tx_phase_s + duration_s`.
///
/// Random streams (all derived from `seed`): `net/latency` per directed
/// channel, `net/order/{node}` for the pre-broadcast shuffle, `forge` and
/// `tx`. None of them depend on `orderer`, so two runs with the same seed
/// see the same forging schedule and the same per-channel delay sequence.
pub fn simulate<O: BroadcastOrder>(
    setup: &RunSetup,
    seed: u64,
    orderer: &mut O,
    record: bool,
) -> Result<RunOutput> {
    setup.validate()?;
    let topo = &setup.topology;
    let n = topo.node_count();
    let genesis = Block {
        id: BlockId(0),
        parent: None,
        height: 0,
        forger: 0,
        size: 0,
        forged_at: 0.0,
    };
    let nodes: Vec<NodeState> = topo
        .nodes
        .iter()
        .map(|d| {
            let mut s = NodeState::new(d.id, d.region, d.is_miner, topo.adjacency[d.id].clone(), n);
            s.learn(genesis.id, 0, 0.0);
            s
        })
        .collect();
    let order_rngs = (0..n)
        .map(|i| RngStream::derive(seed, &format!("net/order/{i}")))
        .collect();

    let mut q = EventQueue::new();
    let start = setup.block_phase_start();
    let t_end = setup.t_end();
    let mut tx_rng = RngStream::derive(seed, "tx");
    for t in poisson_times(setup.protocol.tx_rate_per_s, 0.0, start, &mut tx_rng) {
        let origin = (tx_rng.uniform() * n as f64) as usize;
        q.schedule(SimTime::new(t)?, EventKind::TxInjected { origin: origin.min(n - 1) })?;
    }
    let mut forge_rng = RngStream::derive(seed, "forge");
    for (t, forger) in schedule_forging(topo, setup.protocol.forging_interval_s, start, t_end, &mut forge_rng)? {
        q.schedule(SimTime::new(t)?, EventKind::BlockForged { forger })?;
    }
    let end = SimTime::new(t_end)?;
    q.schedule(end, EventKind::SimulationEnd)?;

    let mut world = World {
        setup,
        nodes,
        blocks: vec![genesis],
        channel_noise: KeyedNormals::new(seed, "net/latency", n * n),
        order_rngs,
        orderer,
        log: RunLog {
            node_count: n,
            t_end,
            rows: record.then(Vec::new),
            ..RunLog::default()
        },
        next_tx: 0,
    };
    let log = q
        .run_until(end, record, |q, e| world.handle(q, e))
        .map_err(|fault| match fault.source {
            Error::Protocol(msg) => Error::Protocol(format!(
                "{msg} (at {} after {} events)",
                fault.event.at, fault.log.processed
            )),
            other => other,
        })?;
    Ok(RunOutput {
        event_digest: record.then(|| log.digest()),
        events_processed: log.processed,
        log: world.log,
    })
}
