use std::path::PathBuf;

use crate::trainer::LogRow;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke a documented precondition (shape, dimension, range).
    #[error("contract violation in {op}: {detail}")]
    Contract { op: &'static str, detail: String },

    #[error("non-finite value produced by node {node} ({op})")]
    NumericFault { node: usize, op: &'static str },

    #[error("point {x} lies outside the image of the map")]
    OutOfSupport { x: f64 },

    #[error("divergence undefined: q vanishes at {x} where p > 0")]
    DivergenceUndefined { x: f64 },

    #[error("optimal discriminator undefined: both densities vanish")]
    UndefinedPoint,

    #[error("density ratio is infinite for D = {d}")]
    InfiniteRatio { d: f64 },

    #[error("logit {logit} exceeds the maximum-likelihood cost guard")]
    LogitOverflow { logit: f64 },

    #[error("training diverged at step {step}")]
    Diverged { step: usize, last: Option<Box<LogRow>> },

    #[error("checkpoint {path}: {detail}")]
    Checkpoint { path: PathBuf, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Contract {
            op,
            detail: detail.into(),
        }
    }
}
