//! Vertex-centered finite-volume solver for steady scalar convection-diffusion.
//!
//! The residual of point `i` is net inflow plus source,
//! `R_i = s V_i - sum_faces F`, with the outward edge flux
//! `F = lam+ u_a + lam- u_b - nu w (u_b - u_a)`, `lam = a . n`.
//! Boundary half-faces use a ghost value: the marker's Dirichlet constant, or
//! the point's own value on unmarked edges.

use std::collections::BTreeMap;
use std::sync::Mutex;

use partape::linsolve::{self, CsrMatrix, GmresStats, LinearSolverSettings};
use partape::{
    parallel_region, pause_preaccumulation, preacc_start, preacc_start_kind, resume_preaccumulation, ActiveScalar,
    AdError, SessionKind,
};

use crate::coloring::{
    adaptive_group_size, color_edges, coloring_efficiency, gather_structure, Coloring, GroupSizeChoice,
    DEFAULT_EFFICIENCY_THRESHOLD, DEFAULT_GROUP_SIZE, DEFAULT_MAX_COLORS,
};
use crate::error::{FvmError, Result};
use crate::geometry::{compute_metrics, passive_coords, Metrics, Vec2};
use crate::mesh::{Mesh, Topology};
use crate::shared::Disjoint;

#[derive(Debug, Clone, PartialEq)]
pub struct Physics {
    /// Constant advection velocity.
    pub velocity: [f64; 2],
    /// Diffusivity, > 0.
    pub nu: f64,
    /// Dirichlet value per boundary marker. Marked edges without an entry use 0.
    pub boundary: BTreeMap<String, f64>,
    /// Pseudo-time CFL number; `inf` gives a plain Newton step.
    pub cfl: f64,
    /// Marker whose faces carry the objective.
    pub objective_marker: String,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            velocity: [1.0, 0.3],
            nu: 0.1,
            boundary: [("left".to_string(), 1.0)].into_iter().collect(),
            cfl: 1e4,
            objective_marker: "right".into(),
        }
    }
}

impl Physics {
    pub fn validate(&self) -> Result<()> {
        if self.nu.is_nan() || self.nu <= 0.0 {
            return Err(FvmError::Config(format!("nu must be positive, got {}", self.nu)));
        }
        if self.cfl.is_nan() || self.cfl <= 0.0 {
            return Err(FvmError::Config(format!("cfl must be positive, got {}", self.cfl)));
        }
        if !self.velocity.iter().all(|v| v.is_finite()) {
            return Err(FvmError::Config("velocity must be finite".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` setting: `nu`, `cfl`, `velocity_x`,
    /// `velocity_y`, `objective_marker` or `boundary.<marker>`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || {
            value
                .parse::<f64>()
                .map_err(|_| FvmError::Config(format!("{key}: `{value}` is not a number")))
        };
        match key {
            "nu" => self.nu = num()?,
            "cfl" => self.cfl = num()?,
            "velocity_x" => self.velocity[0] = num()?,
            "velocity_y" => self.velocity[1] = num()?,
            "objective_marker" => self.objective_marker = value.to_string(),
            _ => match key.strip_prefix("boundary.") {
                Some(m) => {
                    self.boundary.insert(m.to_string(), num()?);
                }
                None => return Err(FvmError::Config(format!("unknown physics key `{key}`"))),
            },
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopStrategy {
    Coloring,
    Reduction,
    Auto,
}

impl std::str::FromStr for LoopStrategy {
    type Err = FvmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coloring" => Ok(Self::Coloring),
            "reduction" => Ok(Self::Reduction),
            "auto" => Ok(Self::Auto),
            _ => Err(FvmError::Config(format!("unknown loop strategy `{s}`"))),
        }
    }
}

impl LoopStrategy {
    pub fn name(self) -> &'static str {
        match self {
            Self::Coloring => "coloring",
            Self::Reduction => "reduction",
            Self::Auto => "auto",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub threads: usize,
    pub strategy: LoopStrategy,
    pub group_size: usize,
    /// With coloring: when the configured group size misses the efficiency
    /// threshold, search for the largest admissible smaller size.
    pub relax: bool,
    pub max_colors: usize,
    pub efficiency_threshold: f64,
    pub linsolve: LinearSolverSettings,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            threads: 1,
            strategy: LoopStrategy::Coloring,
            group_size: DEFAULT_GROUP_SIZE,
            relax: true,
            max_colors: DEFAULT_MAX_COLORS,
            efficiency_threshold: DEFAULT_EFFICIENCY_THRESHOLD,
            linsolve: LinearSolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum LoopPlan {
    Colored(Coloring),
    Reduction(Vec<Vec<(usize, f64)>>),
}

impl LoopPlan {
    pub fn is_colored(&self) -> bool {
        matches!(self, Self::Colored(_))
    }
}

/// Parameters of interest: mesh coordinates and the source amplitude.
#[derive(Debug, Clone)]
pub struct Params {
    pub coords: Vec<Vec2>,
    pub source: ActiveScalar,
}

impl Params {
    pub fn passive(mesh: &Mesh, source: f64) -> Self {
        Self {
            coords: passive_coords(mesh.points()),
            source: ActiveScalar::new(source),
        }
    }

    pub fn values(&self) -> (Vec<[f64; 2]>, f64) {
        (
            self.coords.iter().map(|c| [c[0].value(), c[1].value()]).collect(),
            self.source.value(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub u: Vec<f64>,
    /// `||R||_2` before each step and after the last one.
    pub residuals: Vec<f64>,
    /// Norm of the residual at `U = 0`, the convergence reference.
    pub reference: f64,
    pub converged: bool,
}

impl PrimalSolution {
    pub fn iterations(&self) -> usize {
        self.residuals.len() - 1
    }
}

pub struct Problem {
    mesh: Mesh,
    topo: Topology,
    physics: Physics,
    options: SolverOptions,
    plan: LoopPlan,
    /// Dirichlet value per boundary edge, `None` for unmarked edges.
    ghost: Vec<Option<f64>>,
    /// Boundary edge indices on the objective marker.
    objective_faces: Vec<usize>,
}

fn keep(slot: &Mutex<Option<AdError>>, r: std::result::Result<(), AdError>) {
    if let Err(e) = r {
        slot.lock().unwrap().get_or_insert(e);
    }
}

impl Problem {
    pub fn new(mesh: Mesh, physics: Physics, options: SolverOptions) -> Result<Self> {
        physics.validate()?;
        let topo = Topology::build(&mesh)?;
        let objective_marker = topo
            .marker_index(&physics.objective_marker)
            .ok_or_else(|| FvmError::Config(format!("mesh has no marker `{}`", physics.objective_marker)))?;
        for name in physics.boundary.keys() {
            if topo.marker_index(name).is_none() {
                return Err(FvmError::Config(format!("boundary value for unknown marker `{name}`")));
            }
        }
        let ghost = topo
            .boundary
            .iter()
            .map(|b| {
                b.marker
                    .map(|m| physics.boundary.get(&topo.marker_names[m]).copied().unwrap_or(0.0))
            })
            .collect();
        let objective_faces = topo
            .boundary
            .iter()
            .enumerate()
            .filter(|(_, b)| b.marker == Some(objective_marker))
            .map(|(i, _)| i)
            .collect();
        let plan = Self::build_plan(&mesh, &options);
        Ok(Self {
            mesh,
            topo,
            physics,
            options,
            plan,
            ghost,
            objective_faces,
        })
    }

    fn build_plan(mesh: &Mesh, o: &SolverOptions) -> LoopPlan {
        let reduction = || LoopPlan::Reduction(gather_structure(mesh.edges(), mesh.num_points()));
        let adaptive = || match adaptive_group_size(
            mesh.edges(),
            mesh.num_points(),
            o.group_size,
            o.threads,
            o.efficiency_threshold,
            o.max_colors,
        ) {
            GroupSizeChoice::Colored { coloring, .. } => LoopPlan::Colored(coloring),
            GroupSizeChoice::Fallback { .. } => reduction(),
        };
        match o.strategy {
            LoopStrategy::Reduction => reduction(),
            LoopStrategy::Auto => adaptive(),
            LoopStrategy::Coloring => match color_edges(mesh.edges(), mesh.num_points(), o.group_size, o.max_colors) {
                Ok(c) if !o.relax || coloring_efficiency(&c, o.threads) >= o.efficiency_threshold => {
                    LoopPlan::Colored(c)
                }
                Ok(_) => adaptive(),
                Err(_) => reduction(),
            },
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn physics(&self) -> &Physics {
        &self.physics
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn plan(&self) -> &LoopPlan {
        &self.plan
    }

    pub fn num_points(&self) -> usize {
        self.mesh.num_points()
    }

    pub fn metrics(&self, coords: &[Vec2]) -> Result<Metrics> {
        if coords.len() != self.num_points() {
            return Err(FvmError::Config(format!(
                "expected {} coordinates, got {}",
                self.num_points(),
                coords.len()
            )));
        }
        Ok(compute_metrics(self.mesh.edges(), &self.topo, coords)?)
    }

    fn edge_flux(&self, e: usize, u: &[ActiveScalar], g: &Metrics) -> ActiveScalar {
        let [a, b] = self.mesh.edges()[e];
        let [ax, ay] = self.physics.velocity;
        let n = &g.normals[e];
        let lam = &n[0] * ax + &n[1] * ay;
        let up = lam.max_f(0.0) * &u[a] + lam.min_f(0.0) * &u[b];
        up - &g.weights[e] * self.physics.nu * (&u[b] - &u[a])
    }

    /// Edge flux inside a preaccumulation session over its active inputs.
    fn edge_flux_preacc(&self, e: usize, u: &[ActiveScalar], g: &Metrics) -> std::result::Result<ActiveScalar, AdError> {
        let [a, b] = self.mesh.edges()[e];
        let n = &g.normals[e];
        let inputs: Vec<&ActiveScalar> = [&u[a], &u[b], &n[0], &n[1], &g.weights[e]]
            .into_iter()
            .filter(|v| v.is_active())
            .collect();
        if inputs.is_empty() {
            return Ok(self.edge_flux(e, u, g));
        }
        let s = preacc_start(&inputs)?;
        let f = self.edge_flux(e, u, g);
        s.finish(&[&f])?;
        Ok(f)
    }

    /// Outward flux through the half of boundary edge `k` owned by point `p`.
    fn boundary_flux(&self, k: usize, p: usize, u: &[ActiveScalar], g: &Metrics) -> ActiveScalar {
        let [ax, ay] = self.physics.velocity;
        let n = &g.boundary_normals[k];
        let lam = (&n[0] * ax + &n[1] * ay) * 0.5;
        match self.ghost[k] {
            Some(gv) => lam.max_f(0.0) * &u[p] + lam.min_f(0.0) * gv + (&u[p] - gv) * self.physics.nu,
            None => lam * &u[p],
        }
    }

    fn boundary_flux_preacc(
        &self,
        k: usize,
        p: usize,
        u: &[ActiveScalar],
        g: &Metrics,
    ) -> std::result::Result<ActiveScalar, AdError> {
        let n = &g.boundary_normals[k];
        let inputs: Vec<&ActiveScalar> = [&u[p], &n[0], &n[1]].into_iter().filter(|v| v.is_active()).collect();
        if inputs.is_empty() {
            return Ok(self.boundary_flux(k, p, u, g));
        }
        let s = preacc_start_kind(&inputs, SessionKind::ParallelIncompatible)?;
        let f = self.boundary_flux(k, p, u, g);
        s.finish(&[&f])?;
        Ok(f)
    }

    /// Residual on the configured team and loop plan. Recorded when the
    /// calling thread is recording.
    pub fn residual(&self, u: &[ActiveScalar], g: &Metrics, source: &ActiveScalar) -> Result<Vec<ActiveScalar>> {
        let n = self.num_points();
        if u.len() != n {
            return Err(FvmError::Config(format!("expected {n} states, got {}", u.len())));
        }
        let edges = self.mesh.edges();
        let mut r: Vec<ActiveScalar> = (0..n).map(|_| ActiveScalar::new(0.0)).collect();
        let mut flux: Vec<ActiveScalar> = match self.plan {
            LoopPlan::Reduction(_) => (0..edges.len()).map(|_| ActiveScalar::new(0.0)).collect(),
            LoopPlan::Colored(_) => Vec::new(),
        };
        let err = Mutex::new(None);
        {
            let rs = Disjoint::new(&mut r);
            let fs = Disjoint::new(&mut flux);
            parallel_region(self.options.threads, |ctx| {
                match &self.plan {
                    LoopPlan::Colored(c) => {
                        // Groups of one color touch disjoint points, so the
                        // adjoints read here are private to the thread.
                        ctx.set_no_shared_reading(true);
                        for groups in &c.color_groups {
                            ctx.for_static(groups.len(), |k| {
                                for e in c.groups[groups[k]].edges.clone() {
                                    let [a, b] = edges[e];
                                    match self.edge_flux_preacc(e, u, g) {
                                        Ok(f) => unsafe {
                                            *rs.get(a) -= &f;
                                            *rs.get(b) += &f;
                                        },
                                        Err(x) => keep(&err, Err(x)),
                                    }
                                }
                            });
                        }
                        ctx.set_no_shared_reading(false);
                    }
                    LoopPlan::Reduction(gather) => {
                        // Neighbouring edges on different threads share
                        // inputs, which preaccumulation cannot handle.
                        pause_preaccumulation();
                        ctx.for_static(edges.len(), |e| unsafe {
                            *fs.get(e) = self.edge_flux(e, u, g);
                        });
                        ctx.for_static(n, |i| {
                            let ri = unsafe { rs.get(i) };
                            for &(e, sign) in &gather[i] {
                                let f = unsafe { fs.read(e) };
                                if sign > 0.0 {
                                    *ri -= f;
                                } else {
                                    *ri += f;
                                }
                            }
                        });
                        keep(&err, resume_preaccumulation());
                    }
                }
                ctx.master(|| {
                    for (k, be) in self.topo.boundary.iter().enumerate() {
                        for p in edges[be.edge] {
                            match self.boundary_flux_preacc(k, p, u, g) {
                                Ok(f) => unsafe { *rs.get(p) -= &f },
                                Err(x) => keep(&err, Err(x)),
                            }
                        }
                    }
                });
                ctx.for_static(n, |i| unsafe {
                    *rs.get(i) += source * &g.volumes[i];
                });
            })?;
        }
        if let Some(e) = err.into_inner().unwrap() {
            return Err(e.into());
        }
        Ok(r)
    }

    /// Passive outflow Jacobian `K = -dR/dU` plus the pseudo-time shift
    /// `D / cfl`, with `D_i = sum_faces(|lam| + nu |w|)`.
    pub fn step_matrix(&self, g: &Metrics) -> Result<CsrMatrix> {
        let n = self.num_points();
        let [ax, ay] = self.physics.velocity;
        let nu = self.physics.nu;
        let mut t = Vec::with_capacity(4 * self.mesh.num_edges() + 2 * n);
        let mut d = vec![0.0; n];
        for (e, &[a, b]) in self.mesh.edges().iter().enumerate() {
            let nv = &g.normals[e];
            let lam = nv[0].value() * ax + nv[1].value() * ay;
            let w = g.weights[e].value();
            let ca = lam.max(0.0) + nu * w;
            let cb = lam.min(0.0) - nu * w;
            t.extend([(a, a, ca), (a, b, cb), (b, a, -ca), (b, b, -cb)]);
            let s = lam.abs() + nu * w.abs();
            d[a] += s;
            d[b] += s;
        }
        for (k, be) in self.topo.boundary.iter().enumerate() {
            let nv = &g.boundary_normals[k];
            let lam = 0.5 * (nv[0].value() * ax + nv[1].value() * ay);
            for p in self.mesh.edges()[be.edge] {
                let (kpp, s) = match self.ghost[k] {
                    Some(_) => (lam.max(0.0) + nu, lam.abs() + nu),
                    None => (lam, lam.abs()),
                };
                t.push((p, p, kpp));
                d[p] += s;
            }
        }
        if self.physics.cfl.is_finite() {
            for (i, di) in d.iter().enumerate() {
                t.push((i, i, di / self.physics.cfl));
            }
        }
        Ok(CsrMatrix::from_triplets(n, &t)?)
    }

    /// One implicit pseudo-time step `G(U, X) = U + A^{-1} R(U, X)`. The
    /// linear solve is recorded as an external function.
    pub fn primal_step(
        &self,
        u: &[ActiveScalar],
        g: &Metrics,
        source: &ActiveScalar,
        a: &CsrMatrix,
    ) -> Result<(Vec<ActiveScalar>, GmresStats)> {
        let r = self.residual(u, g, source)?;
        let (du, stats) = linsolve::solve(a, &r, &self.options.linsolve)?;
        Ok((u.iter().zip(&du).map(|(ui, d)| ui + d).collect(), stats))
    }

    /// `J = sum over objective faces of length * (U_a + U_b) / 2`.
    pub fn objective(&self, u: &[ActiveScalar], g: &Metrics) -> ActiveScalar {
        let mut j = ActiveScalar::new(0.0);
        for &k in &self.objective_faces {
            let [a, b] = self.mesh.edges()[self.topo.boundary[k].edge];
            j += &g.boundary_lengths[k] * (&u[a] + &u[b]) * 0.5;
        }
        j
    }

    /// Passive pseudo-time iteration until `||R|| <= tol * ||R(0)||`.
    pub fn primal_solve(
        &self,
        x: &Params,
        u0: Option<&[f64]>,
        tol: f64,
        max_iters: usize,
    ) -> Result<PrimalSolution> {
        let n = self.num_points();
        let g = self.metrics(&x.coords)?;
        let a = self.step_matrix(&g)?;
        let zero: Vec<ActiveScalar> = (0..n).map(|_| ActiveScalar::new(0.0)).collect();
        let reference = norm(&self.residual(&zero, &g, &x.source)?);
        let mut u: Vec<ActiveScalar> = match u0 {
            Some(v) if v.len() == n => v.iter().map(|&x| ActiveScalar::new(x)).collect(),
            Some(v) => return Err(FvmError::Config(format!("expected {n} initial states, got {}", v.len()))),
            None => zero,
        };
        let mut residuals = Vec::new();
        let mut converged = false;
        for it in 0..=max_iters {
            let r = self.residual(&u, &g, &x.source)?;
            let rn = norm(&r);
            residuals.push(rn);
            if rn <= tol * reference || rn == 0.0 {
                converged = true;
                break;
            }
            if it == max_iters {
                break;
            }
            let (du, _) = linsolve::solve(&a, &r, &self.options.linsolve)?;
            u = u.iter().zip(&du).map(|(ui, d)| ActiveScalar::new(ui.value() + d.value())).collect();
        }
        Ok(PrimalSolution {
            u: u.iter().map(ActiveScalar::value).collect(),
            residuals,
            reference,
            converged,
        })
    }
}

pub fn norm(v: &[ActiveScalar]) -> f64 {
    v.iter().map(|x| x.value() * x.value()).sum::<f64>().sqrt()
}
