//! Edge-based finite-volume convection-diffusion on 2D meshes, with edge
//! coloring for parallel loops and a discrete adjoint driver built on
//! `partape`.

pub mod coloring;
pub mod driver;
pub mod error;
pub mod geometry;
pub mod mesh;
mod shared;
pub mod solver;

pub use coloring::{
    adaptive_group_size, bisect_largest, color_edges, coloring_efficiency, gather_structure, is_conflict_free,
    Bisection, Coloring, ColoringFailure, Group, GroupSizeChoice,
};
pub use driver::{
    AdjointDriver, AdjointMode, AdjointModel, AdjointResult, AdjointSettings, AdjointSolve, PhaseTimes,
    PrimaryRecording, Sensitivity,
};
pub use error::{FvmError, MeshError};
pub use geometry::{compute_metrics, Metrics, Vec2};
pub use mesh::{BoundaryEdge, Mesh, Side, Topology};
pub use solver::{LoopPlan, LoopStrategy, Params, Physics, PrimalSolution, Problem, SolverOptions};
