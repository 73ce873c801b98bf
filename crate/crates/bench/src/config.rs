//! Benchmark configuration and its `key = value` text form.

use std::path::{Path, PathBuf};

use partape::linsolve::LinearSolverSettings;
use partape::{default_threads, AdConfig, PreaccMode, Scheme};
use partape_fvm::{AdjointSettings, LoopStrategy, Mesh, Physics, Problem, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeshSource {
    /// Generated unit square with `nx * ny` cells.
    Grid { nx: usize, ny: usize },
    File(PathBuf),
}

impl std::fmt::Display for MeshSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshSource::Grid { nx, ny } => write!(f, "grid:{nx}x{ny}"),
            MeshSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub scheme: Scheme,
    pub preacc: PreaccMode,
    pub shared_read_opt: bool,
    pub adjoint_vector_opt: bool,
    pub threads: usize,
    pub loop_strategy: LoopStrategy,
    pub group_size: usize,
    pub relax: bool,
    pub adjoint: AdjointSettings,
    pub mesh: MeshSource,
    /// Random displacement of interior grid points, as a fraction of the
    /// smaller cell width. Drawn from `seed`.
    pub jitter: f64,
    pub physics: Physics,
    pub source: f64,
    pub linsolve: LinearSolverSettings,
    pub primal_tol: f64,
    pub primal_max_iters: usize,
    pub repetitions: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Linear,
            preacc: PreaccMode::On,
            shared_read_opt: true,
            adjoint_vector_opt: true,
            threads: default_threads(),
            loop_strategy: LoopStrategy::Coloring,
            group_size: partape_fvm::coloring::DEFAULT_GROUP_SIZE,
            relax: true,
            adjoint: AdjointSettings::default(),
            mesh: MeshSource::Grid { nx: 32, ny: 32 },
            jitter: 0.0,
            physics: Physics::default(),
            source: 1.0,
            linsolve: LinearSolverSettings::default(),
            primal_tol: 1e-10,
            primal_max_iters: 200,
            repetitions: 5,
            warmup: 1,
            seed: 0,
        }
    }
}

pub(crate) fn parse_bool(key: &str, v: &str) -> Result<bool, BenchError> {
    match v {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        _ => Err(BenchError::Config(format!("{key}: expected on/off, got `{v}`"))),
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, BenchError> {
    v.parse()
        .map_err(|_| BenchError::Config(format!("{key}: cannot parse `{v}`")))
}

impl BenchConfig {
    /// Applies one setting. Keys not owned by the harness are passed on to
    /// [`Physics::set`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), BenchError> {
        let v = value.trim();
        match key.trim() {
            "scheme" => self.scheme = v.parse().map_err(BenchError::Config)?,
            "preacc" => self.preacc = v.parse().map_err(BenchError::Config)?,
            "shared_read_opt" | "shared_read" => self.shared_read_opt = parse_bool(key, v)?,
            "adjoint_vector_opt" => self.adjoint_vector_opt = parse_bool(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "loop_strategy" => self.loop_strategy = v.parse()?,
            "group_size" | "edge_color_group_size" => self.group_size = parse(key, v)?,
            "relax" | "edge_coloring_relax" => self.relax = parse_bool(key, v)?,
            "adjoint_mode" => self.adjoint.mode = v.parse()?,
            "adjoint_iters" => self.adjoint.iters = parse(key, v)?,
            "adjoint_tol" => {
                self.adjoint.tol = match v {
                    "none" | "" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "gmres_restart" => self.adjoint.gmres_restart = parse(key, v)?,
            "grid" => {
                let (nx, ny) = v
                    .split_once(['x', ' '])
                    .ok_or_else(|| BenchError::Config(format!("grid: expected NXxNY, got `{v}`")))?;
                self.mesh = MeshSource::Grid {
                    nx: parse(key, nx.trim())?,
                    ny: parse(key, ny.trim())?,
                };
            }
            "mesh" => self.mesh = MeshSource::File(PathBuf::from(v)),
            "jitter" => self.jitter = parse(key, v)?,
            "source" => self.source = parse(key, v)?,
            "linsolve.tol" => self.linsolve.tol = parse(key, v)?,
            "linsolve.reverse_tol" => self.linsolve.reverse_tol = parse(key, v)?,
            "linsolve.max_iters" => self.linsolve.max_iters = parse(key, v)?,
            "linsolve.restart" => self.linsolve.restart = parse(key, v)?,
            "primal_tol" => self.primal_tol = parse(key, v)?,
            "primal_max_iters" => self.primal_max_iters = parse(key, v)?,
            "reps" | "repetitions" => self.repetitions = parse(key, v)?,
            "warmup" => self.warmup = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            k => self.physics.set(k, v)?,
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), BenchError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k, v)
                .map_err(|e| BenchError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), BenchError> {
        self.apply_text(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.repetitions < 1 {
            return fail("repetitions must be at least 1");
        }
        if self.threads < 1 {
            return fail("threads must be at least 1");
        }
        if self.group_size < 1 {
            return fail("group size must be at least 1");
        }
        if self.adjoint.gmres_restart < 1 {
            return fail("gmres restart must be at least 1");
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return fail("jitter must lie in [0, 0.5)");
        }
        if let MeshSource::Grid { nx, ny } = self.mesh {
            if nx < 1 || ny < 1 {
                return fail("grid needs at least one cell per direction");
            }
        }
        self.physics.validate()?;
        Ok(())
    }

    pub fn ad_config(&self) -> AdConfig {
        AdConfig {
            scheme: self.scheme,
            preacc: self.preacc,
            shared_read_opt: self.shared_read_opt,
            adjoint_vector_opt: self.adjoint_vector_opt,
            threads: self.threads,
            ..AdConfig::default()
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            threads: self.threads,
            strategy: self.loop_strategy,
            group_size: self.group_size,
            relax: self.relax,
            linsolve: self.linsolve,
            ..SolverOptions::default()
        }
    }

    pub fn build_mesh(&self) -> Result<Mesh, BenchError> {
        match &self.mesh {
            MeshSource::File(p) => Ok(Mesh::load(p)?),
            &MeshSource::Grid { nx, ny } => {
                let mesh = Mesh::generate_grid(nx, ny, 1.0, 1.0)?;
                if self.jitter == 0.0 {
                    return Ok(mesh);
                }
                let amp = self.jitter / nx.max(ny) as f64;
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let pts = mesh
                    .points()
                    .iter()
                    .map(|&[x, y]| {
                        let interior = x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0;
                        if interior {
                            [x + amp * rng.gen_range(-1.0..1.0), y + amp * rng.gen_range(-1.0..1.0)]
                        } else {
                            [x, y]
                        }
                    })
                    .collect();
                Ok(mesh.with_points(pts)?)
            }
        }
    }

    pub fn build_problem(&self) -> Result<Problem, BenchError> {
        Ok(Problem::new(self.build_mesh()?, self.physics.clone(), self.solver_options())?)
    }
}
