use thiserror::Error;

/// Errors raised by the simulator and the learning harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("event scheduled in the past: at {at} < clock {now}")]
    ScheduleInPast { at: f64, now: f64 },

    #[error("no simulation-end event at t = {0} in the queue")]
    MissingEndEvent(f64),

    #[error("protocol fault: {0}")]
    Protocol(String),

    #[error("numerical fault: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
