//! Sparse linear solves and their adjoints.

pub mod extfunc;
pub mod gmres;
pub mod sparse;

use thiserror::Error;

pub use extfunc::{reverse_solve, solve, solve_passive, LinearSolverSettings};
pub use gmres::{gmres, GmresSettings, GmresStats};
pub use sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("GMRES did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },
    #[error("GMRES broke down: relative residual {residual:e} after {iterations} iterations")]
    Breakdown { residual: f64, iterations: usize },
    #[error("invalid linear system: {0}")]
    Structure(String),
}
