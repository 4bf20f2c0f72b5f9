//! Deterministic discrete-event core: virtual clock, `(at, seq)` ordered
//! event queue and label-derived random streams.

mod queue;
mod rng;

pub use queue::{Event, EventLog, EventPayload, EventQueue, RunFault, SimTime};
pub use rng::{derive_stream, KeyedNormals, RngStream};
