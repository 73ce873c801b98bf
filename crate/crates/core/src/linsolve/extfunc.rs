//! Linear solves recorded as external functions.
//!
//! The tape stores a snapshot of the (passive) matrix instead of the solver
//! iterations. Reverse evaluation transposes the snapshot in place once and
//! solves `A^T s = x̄` with the same GMRES routine, then adds `s` to `b̄`.

use std::sync::Arc;

use parking_lot::Mutex;

use super::gmres::{gmres, GmresSettings, GmresStats};
use super::sparse::CsrMatrix;
use super::SolverError;
use crate::adjoint::AdjointSlice;
use crate::context::{with_binding, ExternalFunction};
use crate::error::AdError;
use crate::ids::Identifier;
use crate::scalar::ActiveScalar;
use crate::tape::EventKind;
use crate::team::ThreadTeam;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolverSettings {
    pub tol: f64,
    pub abs_tol: f64,
    /// Tolerance of the transposed solve during reverse evaluation.
    pub reverse_tol: f64,
    pub max_iters: usize,
    pub restart: usize,
    /// Team size for matrix-vector products; 0 uses the context default.
    pub threads: usize,
}

impl Default for LinearSolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            abs_tol: 0.0,
            reverse_tol: 1e-10,
            max_iters: 1000,
            restart: 20,
            threads: 0,
        }
    }
}

fn jacobi(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

/// Passive solve of `A x = b` on `threads` members of `team`.
pub fn solve_passive(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    settings: &GmresSettings,
    team: &ThreadTeam,
    threads: usize,
) -> Result<GmresStats, SolverError> {
    if b.len() != a.dim() {
        return Err(SolverError::Structure(format!(
            "right-hand side length {} != matrix dimension {}",
            b.len(),
            a.dim()
        )));
    }
    let d = jacobi(a);
    gmres(
        |v: &[f64], out: &mut [f64]| {
            a.matvec_par(v, out, team, threads);
            Ok::<(), SolverError>(())
        },
        Some(&d),
        b,
        x,
        settings,
    )
}

/// Transposed solve `A^T s = x̄` on a matrix that already holds `A^T`.
pub fn reverse_solve(
    transposed: &CsrMatrix,
    xbar: &[f64],
    settings: &GmresSettings,
    team: &ThreadTeam,
    threads: usize,
) -> Result<(Vec<f64>, GmresStats), SolverError> {
    let mut s = vec![0.0; xbar.len()];
    let stats = solve_passive(transposed, xbar, &mut s, settings, team, threads)?;
    Ok((s, stats))
}

struct Payload {
    matrix: CsrMatrix,
    transposed: bool,
    last_iterations: usize,
}

/// Tape node of one recorded linear solve.
pub struct SolveNode {
    inputs: Vec<Identifier>,
    outputs: Vec<Identifier>,
    settings: GmresSettings,
    threads: usize,
    payload: Mutex<Payload>,
}

impl SolveNode {
    /// Iterations of the most recent reverse solve.
    pub fn last_reverse_iterations(&self) -> usize {
        self.payload.lock().last_iterations
    }
}

impl ExternalFunction for SolveNode {
    fn reverse(&self, adj: &AdjointSlice<'_>, team: &ThreadTeam) -> Result<(), AdError> {
        let xbar: Vec<f64> = self.outputs.iter().map(|&id| adj.get(id)).collect();
        for &id in &self.outputs {
            adj.set(id, 0.0);
        }
        let mut p = self.payload.lock();
        if xbar.iter().all(|&v| v == 0.0) {
            p.last_iterations = 0;
            return Ok(());
        }
        if !p.transposed {
            p.matrix.transpose_in_place()?;
            p.transposed = true;
        }
        let (s, stats) = reverse_solve(&p.matrix, &xbar, &self.settings, team, self.threads)?;
        p.last_iterations = stats.iterations;
        for (&id, &si) in self.inputs.iter().zip(&s) {
            if id != 0 {
                adj.add(id, si);
            }
        }
        Ok(())
    }

    fn reverse_iterations(&self) -> Option<usize> {
        Some(self.last_reverse_iterations())
    }
}

/// Solves `A x = b`. When recording with active `b`, the solve is attached to
/// the master tape as an external function and each `x_i` gets a fresh
/// identifier. The matrix is treated as passive data.
pub fn solve(
    a: &CsrMatrix,
    b: &[ActiveScalar],
    settings: &LinearSolverSettings,
) -> Result<(Vec<ActiveScalar>, GmresStats), AdError> {
    let rhs: Vec<f64> = b.iter().map(ActiveScalar::value).collect();
    let forward = GmresSettings {
        tol: settings.tol,
        abs_tol: settings.abs_tol,
        max_iters: settings.max_iters,
        restart: settings.restart,
    };
    let ctx = with_binding(|bd| {
        (
            Arc::clone(&bd.shared),
            bd.recording && b.iter().any(ActiveScalar::is_active),
            bd.in_region,
        )
    });
    let mut x = vec![0.0; rhs.len()];
    let Some((shared, record, in_region)) = ctx else {
        let team = ThreadTeam::new();
        let threads = settings.threads.max(1);
        let stats = solve_passive(a, &rhs, &mut x, &forward, &team, threads)?;
        return Ok((x.into_iter().map(ActiveScalar::new).collect(), stats));
    };
    if in_region {
        return Err(AdError::Unsupported(
            "linear solve inside a parallel region; call it from serial code",
        ));
    }
    let threads = if settings.threads == 0 {
        shared.config.threads
    } else {
        settings.threads
    };
    let stats = solve_passive(a, &rhs, &mut x, &forward, &shared.team, threads)?;
    if !record {
        return Ok((x.into_iter().map(ActiveScalar::new).collect(), stats));
    }
    let node = Arc::new(SolveNode {
        inputs: b.iter().map(ActiveScalar::identifier).collect(),
        outputs: Vec::new(),
        settings: GmresSettings {
            tol: settings.reverse_tol,
            abs_tol: 0.0,
            ..forward
        },
        threads,
        payload: Mutex::new(Payload {
            matrix: a.clone(),
            transposed: false,
            last_iterations: 0,
        }),
    });
    let out = with_binding(|bd| {
        let ids: Vec<Identifier> = x.iter().map(|_| bd.acquire()).collect();
        let mut node = Arc::into_inner(node).expect("node not yet shared");
        node.outputs = ids.clone();
        let mut ext = bd.shared.externals.lock();
        let k = ext.len();
        ext.push(Arc::new(node));
        drop(ext);
        bd.tape.push_event(EventKind::External(k), 0);
        ids
    })
    .expect("binding checked above");
    let xs = x
        .into_iter()
        .zip(out)
        .map(|(v, id)| ActiveScalar::from_parts(v, id))
        .collect();
    Ok((xs, stats))
}
