use partape::AdError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("degenerate face with vertices {vertices:?} (signed area {area:e})")]
    Degenerate { vertices: Vec<usize>, area: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum FvmError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Driver(String),
}

impl From<partape::linsolve::SolverError> for FvmError {
    fn from(e: partape::linsolve::SolverError) -> Self {
        FvmError::Ad(AdError::from(e))
    }
}

pub type Result<T, E = FvmError> = std::result::Result<T, E>;
