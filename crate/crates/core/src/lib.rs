//! Tape-based reverse-mode automatic differentiation with shared-memory
//! parallel recording and evaluation.
//!
//! ```
//! use partape::{AdConfig, AdContext, ActiveScalar};
//!
//! let ctx = AdContext::new(AdConfig::default());
//! let ad = ctx.bind().unwrap();
//! ad.start_recording();
//! let mut x = ActiveScalar::new(3.0);
//! ad.register_input(&mut x).unwrap();
//! let mut y = &x * &x;
//! ad.register_output(&mut y).unwrap();
//! ad.stop_recording().unwrap();
//! ad.ensure_adjoints().unwrap();
//! ad.set_derivative(y.identifier(), 1.0);
//! ad.evaluate_all().unwrap();
//! assert_eq!(ad.get_derivative(x.identifier()), 6.0);
//! ```

pub mod adjoint;
pub mod context;
pub mod error;
mod eval;
pub mod ids;
pub mod linsolve;
pub mod parallel;
pub mod preacc;
pub mod scalar;
pub mod tape;
pub mod team;

pub use adjoint::{AdjointSlice, AdjointVector};
pub use context::{
    current_access_mode, default_threads, Ad, AdConfig, AdContext, ExternalFunction, Position, RecordingStats, RegionRecord,
};
pub use error::AdError;
pub use ids::{AuditSummary, Identifier, Scheme, BLOCK_SIZE};
pub use parallel::{parallel_region, RegionCtx};
pub use preacc::{
    pause_preaccumulation, preacc_start, preacc_start_kind, resume_preaccumulation, PreaccMode,
    PreaccSession, SessionKind,
};
pub use scalar::ActiveScalar;
pub use tape::{AccessMode, EventKind, ParallelEvent, TapePos, TapeStats};
pub use team::{static_chunk, ThreadTeam};
