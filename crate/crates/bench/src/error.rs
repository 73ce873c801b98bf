use partape_fvm::{FvmError, MeshError};
use thiserror::Error;

use crate::report::BenchReport;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Fvm(#[from] FvmError),
    /// A pipeline phase failed; `partial` holds what was measured before.
    #[error("{phase} failed: {message}")]
    Phase {
        phase: &'static str,
        message: String,
        partial: Box<BenchReport>,
    },
    #[error("no reports to emit")]
    EmptyReport,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<MeshError> for BenchError {
    fn from(e: MeshError) -> Self {
        BenchError::Fvm(e.into())
    }
}
