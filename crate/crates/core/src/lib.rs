//! Discrete-event simulation of block propagation over a geo-distributed
//! peer-to-peer network, with a learned neighbour-ordering policy and the
//! statistics used to compare it against random ordering.

pub mod config;
pub mod engine;
mod error;
pub mod metrics;
pub mod network;
pub mod protocol;
pub mod rl;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PolicyParams = rl::PolicyParams<f64>;
pub type Observation = rl::Observation<f64>;
pub type StepRecord = rl::StepRecord<f64>;
pub type TrainState = rl::TrainState<f64>;
pub type EcdfCurve = metrics::EcdfCurve<f64>;
pub type CarbonModel = metrics::CarbonModel<f64>;
