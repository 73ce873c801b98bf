//! Discrete adjoint workflow: primary recording of one solver step, adjoint
//! fixed-point iteration or matrix-free GMRES, passive identifier clearing,
//! secondary recording over the parameters and sensitivity extraction.

use std::time::{Duration, Instant};

use partape::linsolve::{gmres, GmresSettings, SolverError};
use partape::{static_chunk, ActiveScalar, Ad, AdError, Identifier, Position, RecordingStats};

use crate::error::{FvmError, Result};
use crate::shared::Disjoint;
use crate::solver::{Params, Problem};

/// A fixed-point solver `U = G(U, X)` with objective `J(U, X)`.
pub trait AdjointModel {
    type Params: Clone;

    fn num_states(&self) -> usize;

    /// Registers every parameter entry as an input and returns the
    /// identifiers in a fixed order.
    fn register_params(&self, ad: &Ad, x: &mut Self::Params) -> Result<Vec<Identifier>>;

    /// Computes `G(U, X)` and `J(G(U, X), X)`.
    fn step_and_objective(&self, u: &[ActiveScalar], x: &Self::Params) -> Result<(Vec<ActiveScalar>, ActiveScalar)>;
}

impl AdjointModel for Problem {
    type Params = Params;

    fn num_states(&self) -> usize {
        self.num_points()
    }

    /// Order: `x_0, y_0, x_1, y_1, ..., source`.
    fn register_params(&self, ad: &Ad, x: &mut Params) -> Result<Vec<Identifier>> {
        let mut ids = Vec::with_capacity(2 * x.coords.len() + 1);
        for c in x.coords.iter_mut().flat_map(|c| c.iter_mut()) {
            ids.push(ad.register_input(c)?);
        }
        ids.push(ad.register_input(&mut x.source)?);
        Ok(ids)
    }

    fn step_and_objective(&self, u: &[ActiveScalar], x: &Params) -> Result<(Vec<ActiveScalar>, ActiveScalar)> {
        let g = self.metrics(&x.coords)?;
        let a = self.step_matrix(&g)?;
        let (next, _) = self.primal_step(u, &g, &x.source, &a)?;
        let j = self.objective(&next, &g);
        Ok((next, j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjointMode {
    FixedPoint,
    Gmres,
}

impl std::str::FromStr for AdjointMode {
    type Err = FvmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed-point" => Ok(Self::FixedPoint),
            "gmres" => Ok(Self::Gmres),
            _ => Err(FvmError::Config(format!("unknown adjoint mode `{s}`"))),
        }
    }
}

impl AdjointMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::FixedPoint => "fixed-point",
            Self::Gmres => "gmres",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSettings {
    pub mode: AdjointMode,
    /// Fixed-point iterations, or the GMRES iteration cap.
    pub iters: usize,
    /// Stop early once `||U_{i+1} - U_i|| <= tol ||U_{i+1}||` (fixed point)
    /// or the relative GMRES residual reaches `tol`. `None` runs exactly
    /// `iters` fixed-point iterations.
    pub tol: Option<f64>,
    pub gmres_restart: usize,
}

impl Default for AdjointSettings {
    fn default() -> Self {
        Self {
            mode: AdjointMode::FixedPoint,
            iters: 300,
            tol: None,
            gmres_restart: 50,
        }
    }
}

/// Wall time per AD phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimes {
    pub recording: Duration,
    pub management: Duration,
    pub evaluation: Duration,
}

impl PhaseTimes {
    pub fn ad_total(&self) -> Duration {
        self.recording + self.management + self.evaluation
    }
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Recording,
    Management,
    Evaluation,
}

/// Live result of a primary recording. Identifier arrays align with the
/// state vector.
pub struct PrimaryRecording {
    pub input_ids: Vec<Identifier>,
    pub output_ids: Vec<Identifier>,
    pub objective_id: Identifier,
    pub stats: RecordingStats,
    end: Position,
    start: Position,
    u: Vec<ActiveScalar>,
    g: Vec<ActiveScalar>,
    j: ActiveScalar,
}

impl PrimaryRecording {
    pub fn state(&self) -> &[ActiveScalar] {
        &self.u
    }

    pub fn outputs(&self) -> &[ActiveScalar] {
        &self.g
    }

    pub fn objective(&self) -> &ActiveScalar {
        &self.j
    }
}

#[derive(Debug, Clone)]
pub struct AdjointSolve {
    pub ubar: Vec<f64>,
    /// Fixed point: `||U_{i+1} - U_i||_2` per iteration. GMRES: final
    /// relative residual.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct Sensitivity {
    /// `dJ/dX` in the model's parameter order.
    pub xbar: Vec<f64>,
    pub stats: RecordingStats,
}

impl Sensitivity {
    /// Splits a mesh-problem gradient into coordinate and source parts.
    pub fn split_mesh(&self) -> (Vec<[f64; 2]>, f64) {
        let (src, coords) = self.xbar.split_last().expect("source entry");
        (coords.chunks(2).map(|c| [c[0], c[1]]).collect(), *src)
    }

    /// `sum |xbar|`, used to compare configurations.
    pub fn checksum(&self) -> f64 {
        self.xbar.iter().map(|v| v.abs()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct AdjointResult {
    pub adjoint: AdjointSolve,
    pub sensitivity: Sensitivity,
    pub primary_stats: RecordingStats,
    pub adjoint_capacity: usize,
    pub times: PhaseTimes,
}

pub struct AdjointDriver<'a, M: AdjointModel> {
    model: &'a M,
    ad: &'a Ad,
    times: PhaseTimes,
    sized: bool,
}

impl<'a, M: AdjointModel> AdjointDriver<'a, M> {
    pub fn new(model: &'a M, ad: &'a Ad) -> Self {
        Self {
            model,
            ad,
            times: PhaseTimes::default(),
            sized: false,
        }
    }

    pub fn times(&self) -> PhaseTimes {
        self.times
    }

    fn timed<R>(&mut self, phase: Phase, f: impl FnOnce(&mut Self) -> R) -> R {
        let t = Instant::now();
        let r = f(self);
        let dt = t.elapsed();
        match phase {
            Phase::Recording => self.times.recording += dt,
            Phase::Management => self.times.management += dt,
            Phase::Evaluation => self.times.evaluation += dt,
        }
        r
    }

    fn opt(&self) -> bool {
        self.ad.config().adjoint_vector_opt
    }

    /// Records `G(U*, X)` and `J(G(U*, X), X)` with `U*` as inputs.
    pub fn primary_recording(&mut self, ustar: &[f64], x: &M::Params) -> Result<PrimaryRecording> {
        if self.ad.is_recording() {
            return Err(AdError::Contract("a recording is already active".into()).into());
        }
        if ustar.len() != self.model.num_states() {
            return Err(FvmError::Config(format!(
                "expected {} states, got {}",
                self.model.num_states(),
                ustar.len()
            )));
        }
        let x = x.clone();
        self.timed(Phase::Recording, |d| {
            d.ad.reset_tape()?;
            d.sized = false;
            let start = d.ad.start_position();
            d.ad.start_recording();
            let body = || -> Result<_> {
                let mut u: Vec<ActiveScalar> = ustar.iter().map(|&v| ActiveScalar::new(v)).collect();
                let mut input_ids = Vec::with_capacity(u.len());
                for ui in u.iter_mut() {
                    input_ids.push(d.ad.register_input(ui)?);
                }
                let (mut g, mut j) = d.model.step_and_objective(&u, &x)?;
                let mut output_ids = Vec::with_capacity(g.len());
                for gi in g.iter_mut() {
                    output_ids.push(d.ad.register_output(gi)?);
                }
                let objective_id = d.ad.register_output(&mut j)?;
                Ok((u, g, j, input_ids, output_ids, objective_id))
            };
            let r = body();
            d.ad.stop_recording()?;
            let (u, g, j, input_ids, output_ids, objective_id) = r?;
            Ok(PrimaryRecording {
                input_ids,
                output_ids,
                objective_id,
                stats: d.ad.stats(),
                end: d.ad.position()?,
                start,
                u,
                g,
                j,
            })
        })
    }

    fn prepare(&mut self) -> Result<()> {
        if self.opt() {
            if !self.sized {
                self.timed(Phase::Management, |d| d.ad.ensure_adjoints())?;
                self.sized = true;
            }
        } else {
            // Unoptimized path: capacity is re-checked before every sweep.
            self.timed(Phase::Management, |d| d.ad.ensure_adjoints())?;
        }
        Ok(())
    }

    fn seed(&mut self, ids: &[Identifier], vals: &[f64]) {
        self.timed(Phase::Management, |d| {
            if d.opt() {
                let threads = d.ad.config().threads.max(1);
                d.ad.with_adjoints(|adj| {
                    d.ad.team().run(threads, &|t| {
                        for i in static_chunk(ids.len(), t, threads) {
                            if ids[i] != 0 {
                                adj.set(ids[i], vals[i]);
                            }
                        }
                    })
                });
            } else {
                for (&id, &v) in ids.iter().zip(vals) {
                    d.ad.set_derivative(id, v);
                }
            }
        })
    }

    /// Reads and clears the adjoints of `ids`.
    fn extract(&mut self, ids: &[Identifier]) -> Vec<f64> {
        self.timed(Phase::Management, |d| {
            let mut out = vec![0.0; ids.len()];
            if d.opt() {
                let threads = d.ad.config().threads.max(1);
                let o = Disjoint::new(&mut out);
                d.ad.with_adjoints(|adj| {
                    d.ad.team().run(threads, &|t| {
                        for i in static_chunk(ids.len(), t, threads) {
                            if ids[i] != 0 {
                                // SAFETY: static chunks are disjoint.
                                unsafe { *o.get(i) = adj.get(ids[i]) };
                                adj.set(ids[i], 0.0);
                            }
                        }
                    })
                });
            } else {
                for (o, &id) in out.iter_mut().zip(ids) {
                    *o = d.ad.get_derivative(id);
                    d.ad.set_derivative(id, 0.0);
                }
            }
            out
        })
    }

    fn sweep(&mut self, end: Position, start: Position) -> Result<()> {
        self.prepare()?;
        self.timed(Phase::Evaluation, |d| d.ad.evaluate(end, start))?;
        Ok(())
    }

    /// One tape sweep seeded with `v` on `G` and `j_seed` on `J`; returns the
    /// adjoints of `U`.
    fn apply(&mut self, rec: &PrimaryRecording, v: &[f64], j_seed: f64) -> Result<Vec<f64>> {
        self.prepare()?;
        debug_assert!(self.ad.context().adjoints().is_zero(), "adjoint vector not clean");
        self.seed(&rec.output_ids, v);
        self.seed(&[rec.objective_id], &[j_seed]);
        self.sweep(rec.end, rec.start)?;
        Ok(self.extract(&rec.input_ids))
    }

    /// `U_{i+1} = dG/dU^T U_i + dJ~/dU^T`.
    pub fn fixed_point_iterate(&mut self, rec: &PrimaryRecording, ubar: &[f64]) -> Result<Vec<f64>> {
        self.apply(rec, ubar, 1.0)
    }

    pub fn fixed_point_solve(&mut self, rec: &PrimaryRecording, s: &AdjointSettings) -> Result<AdjointSolve> {
        let mut ubar = vec![0.0; rec.input_ids.len()];
        let mut history = Vec::new();
        let mut converged = false;
        for _ in 0..s.iters {
            let next = self.fixed_point_iterate(rec, &ubar)?;
            let diff = l2_diff(&next, &ubar);
            history.push(diff);
            ubar = next;
            if let Some(tol) = s.tol {
                if diff <= tol * l2(&ubar) {
                    converged = true;
                    break;
                }
            }
        }
        Ok(AdjointSolve {
            ubar,
            iterations: history.len(),
            history,
            converged,
        })
    }

    /// Solves `(dG/dU^T - I) U = -dJ~/dU^T` with restarted GMRES, one tape
    /// sweep per operator application.
    pub fn gmres_solve(&mut self, rec: &PrimaryRecording, s: &AdjointSettings) -> Result<AdjointSolve> {
        let n = rec.input_ids.len();
        let zeros = vec![0.0; n];
        let rhs: Vec<f64> = self.apply(rec, &zeros, 1.0)?.into_iter().map(|v| -v).collect();
        let mut ubar = vec![0.0; n];
        let settings = GmresSettings {
            tol: s.tol.unwrap_or(1e-10),
            abs_tol: 0.0,
            max_iters: s.iters.max(1),
            restart: s.gmres_restart.max(1),
        };
        let r = gmres(
            |v: &[f64], out: &mut [f64]| -> Result<()> {
                let w = self.apply(rec, v, 0.0)?;
                for ((o, wi), vi) in out.iter_mut().zip(w).zip(v) {
                    *o = wi - vi;
                }
                Ok(())
            },
            None,
            &rhs,
            &mut ubar,
            &settings,
        );
        let (stats, converged) = match r {
            Ok(st) => (st, true),
            Err(FvmError::Ad(AdError::Solver(SolverError::NotConverged { residual, iterations }))) => (
                partape::linsolve::GmresStats { iterations, residual },
                false,
            ),
            Err(e) => return Err(e),
        };
        Ok(AdjointSolve {
            ubar,
            history: vec![stats.residual],
            iterations: stats.iterations,
            converged,
        })
    }

    pub fn solve_adjoint(&mut self, rec: &PrimaryRecording, s: &AdjointSettings) -> Result<AdjointSolve> {
        match s.mode {
            AdjointMode::FixedPoint => self.fixed_point_solve(rec, s),
            AdjointMode::Gmres => self.gmres_solve(rec, s),
        }
    }

    /// Re-evaluates `G` and `J` without recording so every stored output
    /// loses its identifier, then self-assigns the inputs. Returns the
    /// passive `G` values.
    pub fn passive_clear(&mut self, rec: PrimaryRecording, x: &M::Params) -> Result<Vec<f64>> {
        if self.ad.is_recording() {
            return Err(AdError::Contract("passive clearing while recording".into()).into());
        }
        self.timed(Phase::Recording, |d| {
            let PrimaryRecording { mut u, g: recorded_g, j: recorded_j, .. } = rec;
            let (g, j) = d.model.step_and_objective(&u, x)?;
            drop((recorded_g, recorded_j));
            for ui in u.iter_mut() {
                *ui = ActiveScalar::new(ui.value());
            }
            debug_assert!(u.iter().chain(&g).chain([&j]).all(|v| !v.is_active()));
            Ok(g.iter().map(ActiveScalar::value).collect())
        })
    }

    /// Records `G` and `J` over the parameters, seeds with `ubar` and 1.0 and
    /// returns `dJ~/dX`.
    pub fn secondary_sensitivity(&mut self, ustar: &[f64], x: &M::Params, ubar: &[f64]) -> Result<Sensitivity> {
        if self.ad.is_recording() {
            return Err(AdError::Contract("a recording is already active".into()).into());
        }
        let mut x = x.clone();
        let (ids, out_ids, j_id, stats, end, start, keep) = self.timed(Phase::Recording, |d| {
            d.ad.reset_tape()?;
            d.sized = false;
            let start = d.ad.start_position();
            d.ad.start_recording();
            let body = |x: &mut M::Params| -> Result<_> {
                let ids = d.model.register_params(d.ad, x)?;
                let u: Vec<ActiveScalar> = ustar.iter().map(|&v| ActiveScalar::new(v)).collect();
                let (mut g, mut j) = d.model.step_and_objective(&u, x)?;
                let out_ids = g.iter_mut().map(|gi| d.ad.register_output(gi)).collect::<std::result::Result<Vec<_>, _>>()?;
                let j_id = d.ad.register_output(&mut j)?;
                Ok((ids, out_ids, j_id, (g, j)))
            };
            let r = body(&mut x);
            d.ad.stop_recording()?;
            let (ids, out_ids, j_id, keep) = r?;
            Ok::<_, FvmError>((ids, out_ids, j_id, d.ad.stats(), d.ad.position()?, start, keep))
        })?;
        self.prepare()?;
        debug_assert!(self.ad.context().adjoints().is_zero(), "adjoint vector not clean");
        self.seed(&out_ids, ubar);
        self.seed(&[j_id], &[1.0]);
        self.sweep(end, start)?;
        let xbar = self.extract(&ids);
        self.timed(Phase::Recording, |_| {
            drop(keep);
            drop(x);
        });
        Ok(Sensitivity { xbar, stats })
    }

    /// Full pipeline from a converged state.
    pub fn run(&mut self, ustar: &[f64], x: &M::Params, s: &AdjointSettings) -> Result<AdjointResult> {
        let rec = self.primary_recording(ustar, x)?;
        let primary_stats = rec.stats.clone();
        let adjoint = self.solve_adjoint(&rec, s)?;
        self.passive_clear(rec, x)?;
        let sensitivity = self.secondary_sensitivity(ustar, x, &adjoint.ubar)?;
        Ok(AdjointResult {
            adjoint,
            sensitivity,
            primary_stats,
            adjoint_capacity: self.ad.adjoint_capacity(),
            times: self.times,
        })
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
