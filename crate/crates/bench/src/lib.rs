//! Benchmark harness for the adjoint pipeline: timing decomposition, tape
//! statistics, configuration matrices and CSV / JSON reports.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::{BenchConfig, MeshSource};
pub use error::BenchError;
pub use report::{emit_report, read_rows, write_report, BenchReport, PhaseStat, ReportFormat, ReportRow, Sample};
pub use run::{matrix_cells, run_benchmark, run_matrix, Axis, Cell};
