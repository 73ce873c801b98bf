use thiserror::Error;

use crate::linsolve::SolverError;

/// Errors raised by the AD engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("no AD context is bound to this thread")]
    Unbound,
    #[error("this thread is already bound to an AD context")]
    AlreadyBound,
    #[error("recording is not active on this thread")]
    NotRecording,
    #[error("non-finite partial derivative {partial} for argument {arg}")]
    NonFinitePartial { partial: f64, arg: usize },
    #[error("statement has {0} arguments, at most 255 are supported")]
    TooManyArguments(usize),
    #[error("got {partials} partials for {ids} argument identifiers")]
    LengthMismatch { partials: usize, ids: usize },
    #[error("adjoint vector capacity {capacity} does not cover identifier {required}")]
    CapacityTooSmall { capacity: usize, required: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("identifier pool corrupted: {0}")]
    IdentifierPool(String),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("malformed recording: {0}")]
    Structure(String),
    #[error("preaccumulation input {index} is passive")]
    PassivePreaccInput { index: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl AdError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        AdError::Contract(msg.into())
    }
}
