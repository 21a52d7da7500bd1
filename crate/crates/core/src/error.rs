use thiserror::Error;

use crate::operators::TailClass;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot parse weight `{input}`: {reason}")]
    ParseWeight { input: String, reason: String },

    #[error("x = {x} lies outside the weight table hull [{lo}, {hi}]")]
    OutsideTable { x: f64, lo: f64, hi: f64 },

    #[error("quadrature failed to converge on cell [{lo}, {hi}]")]
    Quadrature { lo: f64, hi: f64 },

    #[error("function is not strictly increasing: {0}")]
    NotMonotone(String),

    #[error("primitive W of `{weight}` stays bounded (W({x:e}) = {value}); the operators need W unbounded")]
    BoundedPrimitive { weight: String, x: f64, value: f64 },

    #[error("tail classification undetermined for {what} at eta = {eta}, level {level}: {tail:?}")]
    Undetermined {
        what: String,
        eta: f64,
        level: u32,
        tail: TailClass,
    },

    #[error("inconsistent index sweep: {0}")]
    InconsistentSweep(String),

    #[error("finite-hull check failed: {0}")]
    CheckFailed(String),

    #[error("position {position} is outside the state space of {kind}")]
    OutOfRange { kind: String, position: i64 },

    #[error("state is not reachable: {0}")]
    NotReachable(String),

    #[error("local-time counter would exceed 2^63 - 1")]
    CounterOverflow,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
