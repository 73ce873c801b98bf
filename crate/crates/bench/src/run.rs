//! Timed adjoint pipeline runs and configuration matrices.

use std::time::Instant;

use partape::AdContext;
use partape_fvm::{AdjointDriver, LoopPlan, Params};

use crate::config::BenchConfig;
use crate::error::BenchError;
use crate::report::{max_rss_kb, BenchReport, Sample};

/// Runs the full adjoint pipeline `warmup + repetitions` times from a
/// converged primal state and aggregates the measured repetitions.
///
/// Recording covers both recordings and passive clearing, management covers
/// seeding, extraction and adjoint-vector sizing, evaluation covers every tape
/// sweep. The remainder of each repetition is reported as `non_ad`.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    config.validate()?;
    let mut report = BenchReport::new(config.clone());
    let problem = config.build_problem()?;
    report.points = problem.num_points();
    report.edges = problem.mesh().num_edges();
    match problem.plan() {
        LoopPlan::Colored(c) => {
            report.plan = "colored".into();
            report.effective_group_size = Some(c.group_size);
            report.colors = Some(c.colors());
        }
        LoopPlan::Reduction(_) => report.plan = "reduction".into(),
    }
    let x = Params::passive(problem.mesh(), config.source);
    let primal = match problem.primal_solve(&x, None, config.primal_tol, config.primal_max_iters) {
        Ok(p) => p,
        Err(e) => return Err(phase_error("primal solve", e, report)),
    };
    report.primal_iterations = primal.iterations();
    report.primal_converged = primal.converged;

    for rep in 0..config.warmup + config.repetitions {
        let ctx = AdContext::new(config.ad_config());
        let ad = match ctx.bind() {
            Ok(ad) => ad,
            Err(e) => return Err(phase_error("binding", e, report)),
        };
        let mut driver = AdjointDriver::new(&problem, &ad);
        let t = Instant::now();
        let result = driver.run(&primal.u, &x, &config.adjoint);
        let total = t.elapsed();
        let r = match result {
            Ok(r) => r,
            Err(e) => {
                report.aggregate();
                return Err(phase_error("adjoint pipeline", e, report));
            }
        };
        if rep < config.warmup {
            continue;
        }
        let secondary = r.sensitivity.stats.total;
        let primary = r.primary_stats.total;
        if !report.samples.is_empty() && (report.primary_tape, report.secondary_tape) != (primary, secondary) {
            report.error = Some("tape statistics differ between repetitions".into());
        }
        report.primary_tape = primary;
        report.secondary_tape = secondary;
        report.tape_per_thread = if secondary.bytes > primary.bytes {
            r.sensitivity.stats.per_thread.clone()
        } else {
            r.primary_stats.per_thread.clone()
        };
        report.adjoint_capacity = r.adjoint_capacity;
        report.adjoint_iterations = r.adjoint.iterations;
        report.adjoint_converged = r.adjoint.converged;
        report.gradient_checksum = r.sensitivity.checksum();
        report.objective = driver_objective(&problem, &primal.u, &x);
        report.samples.push(Sample {
            recording: r.times.recording,
            management: r.times.management,
            evaluation: r.times.evaluation,
            total,
        });
    }
    report.aggregate();
    report.max_rss_kb = max_rss_kb();
    Ok(report)
}

fn driver_objective(problem: &partape_fvm::Problem, u: &[f64], x: &Params) -> f64 {
    let u: Vec<partape::ActiveScalar> = u.iter().map(|&v| partape::ActiveScalar::new(v)).collect();
    match problem.metrics(&x.coords) {
        Ok(g) => problem.objective(&u, &g).value(),
        Err(_) => f64::NAN,
    }
}

fn phase_error(phase: &'static str, e: impl std::fmt::Display, mut partial: BenchReport) -> BenchError {
    let message = e.to_string();
    partial.error = Some(format!("{phase}: {message}"));
    BenchError::Phase {
        phase,
        message,
        partial: Box::new(partial),
    }
}

/// One configuration axis: a setting key and the values to sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl Axis {
    pub fn new(key: &str, values: &[&str]) -> Self {
        Self {
            key: key.into(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = BenchError;

    /// `key=v1,v2,...`
    fn from_str(s: &str) -> Result<Self, BenchError> {
        let (k, vs) = s
            .split_once('=')
            .ok_or_else(|| BenchError::Config(format!("axis `{s}`: expected key=v1,v2")))?;
        let values: Vec<String> = vs.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(BenchError::Config(format!("axis `{k}` has no values")));
        }
        Ok(Self {
            key: k.trim().into(),
            values,
        })
    }
}

/// One point of a configuration matrix.
#[derive(Debug)]
pub struct Cell {
    /// The axis settings of this cell, in axis order.
    pub label: Vec<(String, String)>,
    pub config: Result<BenchConfig, BenchError>,
}

impl Cell {
    pub fn describe(&self) -> String {
        let l: Vec<String> = self.label.iter().map(|(k, v)| format!("{k}={v}")).collect();
        l.join(" ")
    }
}

/// Every combination of axis values applied to `template`, first axis
/// slowest.
pub fn matrix_cells(template: &BenchConfig, axes: &[Axis]) -> Vec<Cell> {
    let mut cells = vec![Cell {
        label: Vec::new(),
        config: Ok(template.clone()),
    }];
    for axis in axes {
        let mut next = Vec::with_capacity(cells.len() * axis.values.len());
        for cell in &cells {
            for v in &axis.values {
                let mut label = cell.label.clone();
                label.push((axis.key.clone(), v.clone()));
                let config = match &cell.config {
                    Ok(c) => {
                        let mut c = c.clone();
                        c.set(&axis.key, v).map(|_| c)
                    }
                    Err(e) => Err(BenchError::Config(e.to_string())),
                };
                next.push(Cell { label, config });
            }
        }
        cells = next;
    }
    cells
}

/// Runs every cell of the Cartesian product. A failing cell yields a report
/// with `error` set; the remaining cells still run.
pub fn run_matrix(template: &BenchConfig, axes: &[Axis]) -> Vec<BenchReport> {
    matrix_cells(template, axes)
        .into_iter()
        .map(|cell| {
            let describe = |e: &BenchError| format!("[{}] {e}", cell.describe());
            match &cell.config {
                Err(e) => {
                    let mut r = BenchReport::new(template.clone());
                    r.error = Some(describe(e));
                    r
                }
                Ok(cfg) => match run_benchmark(cfg) {
                    Ok(r) => r,
                    Err(BenchError::Phase { mut partial, message, phase }) => {
                        partial.error = Some(format!("[{}] {phase}: {message}", cell.describe()));
                        *partial
                    }
                    Err(e) => {
                        let mut r = BenchReport::new(cfg.clone());
                        r.error = Some(describe(&e));
                        r
                    }
                },
            }
        })
        .collect()
}
