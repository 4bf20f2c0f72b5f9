use serde::{Deserialize, Serialize};

use super::ProtocolConfig;
use crate::network::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TxId(pub u32);

/// A block. Chain linkage is by parent id; there is no real hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub parent: Option<BlockId>,
    pub height: u32,
    pub forger: NodeId,
    pub size: u64,
    pub forged_at: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MessageKind {
    FullBlock(BlockId),
    HashAnnounce(BlockId),
    GetHeader(BlockId),
    Header(BlockId),
    GetBody(BlockId),
    Body(BlockId),
    Inv(BlockId),
    GetData(BlockId),
    Tx(TxId),
}

impl MessageKind {
    pub const NAMES: [&'static str; 9] = [
        "full_block",
        "hash_announce",
        "get_header",
        "header",
        "get_body",
        "body",
        "inv",
        "get_data",
        "tx",
    ];

    pub fn index(&self) -> usize {
        match self {
            MessageKind::FullBlock(_) => 0,
            MessageKind::HashAnnounce(_) => 1,
            MessageKind::GetHeader(_) => 2,
            MessageKind::Header(_) => 3,
            MessageKind::GetBody(_) => 4,
            MessageKind::Body(_) => 5,
            MessageKind::Inv(_) => 6,
            MessageKind::GetData(_) => 7,
            MessageKind::Tx(_) => 8,
        }
    }

    pub fn name(&self) -> &'static str {
        Self::NAMES[self.index()]
    }

    pub fn block(&self) -> Option<BlockId> {
        match *self {
            MessageKind::FullBlock(b)
            | MessageKind::HashAnnounce(b)
            | MessageKind::GetHeader(b)
            | MessageKind::Header(b)
            | MessageKind::GetBody(b)
            | MessageKind::Body(b)
            | MessageKind::Inv(b)
            | MessageKind::GetData(b) => Some(b),
            MessageKind::Tx(_) => None,
        }
    }

    /// Whether the message carries the block payload.
    pub fn carries_payload(&self) -> bool {
        matches!(self, MessageKind::FullBlock(_) | MessageKind::Body(_))
    }

    pub fn wire_bytes(&self, cfg: &ProtocolConfig) -> u64 {
        match self {
            MessageKind::FullBlock(_) => cfg.block_bytes,
            MessageKind::HashAnnounce(_) | MessageKind::Inv(_) | MessageKind::GetData(_) => {
                cfg.announce_bytes
            }
            MessageKind::GetHeader(_) => cfg.get_header_bytes,
            MessageKind::Header(_) => cfg.header_bytes,
            MessageKind::GetBody(_) => cfg.get_body_bytes,
            MessageKind::Body(_) => cfg.body_bytes(),
            MessageKind::Tx(_) => cfg.tx_bytes,
        }
    }
}

/// A message to be sent by the node that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Outgoing {
    pub to: NodeId,
    pub kind: MessageKind,
}

/// A message in flight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Message {
    pub kind: MessageKind,
    pub from: NodeId,
    pub to: NodeId,
    pub bytes: u64,
    pub sent_at: f64,
}
