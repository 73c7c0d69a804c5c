use thiserror::Error;

/// Errors raised by scenario construction, model evaluation and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("stability-infeasible: total arrival rate {total} >= aggregate capacity {capacity}")]
    StabilityInfeasible { total: f64, capacity: f64 },

    #[error("not enough sub-bands: {subbands} sub-bands for {iots} IoTs")]
    InsufficientSubbands { subbands: usize, iots: usize },

    #[error("queue unstable: arrival rate {lambda} >= capacity {capacity}")]
    Unstable { lambda: f64, capacity: f64 },

    #[error("upper bound needs at least 2 computing units, got {0}")]
    BoundInapplicable(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("frequency {freq} Hz outside absorption table range [{lo}, {hi}] Hz")]
    Extrapolation { freq: f64, lo: f64, hi: f64 },

    #[error("bracket [{lo}, {hi}] does not change sign")]
    BadBracket { lo: f64, hi: f64 },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("more UAVs ({uavs}) than IoTs ({iots})")]
    TooManyUavs { uavs: usize, iots: usize },

    #[error("objective is not finite at the starting point")]
    NonFiniteStart,

    #[error("no stable association exists: {0}")]
    NoStableAssignment(String),

    #[error("enumeration of {count:.3e} points exceeds cap {cap:.3e}")]
    EnumerationTooLarge { count: f64, cap: f64 },

    #[error("absorption table: {0}")]
    Table(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
