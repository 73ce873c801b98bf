use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use partape::{ActiveScalar, AdContext};
use partape_bench::{emit_report, run_benchmark, run_matrix, Axis, BenchConfig, ReportFormat};
use partape_fvm::{AdjointDriver, Params};

#[derive(Parser)]
#[command(name = "partape", version, about = "Parallel reverse-mode AD on a finite-volume model problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the primal problem and print convergence information.
    Primal(Common),
    /// Solve the primal and adjoint problems and print sensitivities.
    Adjoint(Common),
    /// Time the adjoint pipeline over several repetitions.
    Bench(Common),
    /// Time every combination of the given configuration axes.
    Matrix {
        #[command(flatten)]
        common: Common,
        /// Axis to sweep, as `key=v1,v2,...`; repeatable.
        #[arg(long = "axis", value_name = "KEY=VALUES")]
        axes: Vec<String>,
    },
}

#[derive(Args, Default)]
struct Common {
    /// `key = value` settings file, applied before the flags below.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Mesh file.
    #[arg(long, value_name = "PATH", conflicts_with = "grid")]
    mesh: Option<PathBuf>,
    /// Generated unit-square grid with NX x NY cells.
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    grid: Option<Vec<usize>>,
    /// Random interior point displacement, fraction of a cell width.
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    edge_color_group_size: Option<usize>,
    /// on | off
    #[arg(long)]
    edge_coloring_relax: Option<String>,
    /// coloring | reduction | auto
    #[arg(long)]
    loop_strategy: Option<String>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    primal_tol: Option<f64>,
    #[arg(long)]
    primal_max_iters: Option<usize>,
    /// fixed-point | gmres
    #[arg(long)]
    adjoint_mode: Option<String>,
    #[arg(long)]
    adjoint_iters: Option<usize>,
    #[arg(long)]
    gmres_restart: Option<usize>,
    /// Relative stopping tolerance of the adjoint solve; `none` runs all iterations.
    #[arg(long)]
    adjoint_tol: Option<String>,
    /// linear | reuse
    #[arg(long)]
    scheme: Option<String>,
    /// on | off | hybrid
    #[arg(long)]
    preacc: Option<String>,
    /// Non-atomic reverse updates on colored loops: on | off
    #[arg(long)]
    shared_read: Option<String>,
    /// on | off
    #[arg(long)]
    adjoint_vector_opt: Option<String>,
    /// Team size; defaults to PARTAPE_THREADS or 1.
    #[arg(long)]
    threads: Option<usize>,
    /// csv | json
    #[arg(long, default_value = "csv")]
    report: String,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    /// Seed for random grid jitter.
    #[arg(long)]
    seed: Option<u64>,
    /// Any other setting, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn build(&self) -> Result<BenchConfig> {
        let mut cfg = BenchConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p).with_context(|| format!("reading {}", p.display()))?;
        }
        let mut pairs: Vec<(&str, String)> = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k, v));
            }
        };
        let s = |x: &Option<String>| x.clone();
        put("mesh", self.mesh.as_ref().map(|p| p.display().to_string()));
        put("grid", self.grid.as_ref().map(|g| format!("{}x{}", g[0], g[1])));
        put("jitter", self.jitter.map(|v| v.to_string()));
        put("group_size", self.edge_color_group_size.map(|v| v.to_string()));
        put("relax", s(&self.edge_coloring_relax));
        put("loop_strategy", s(&self.loop_strategy));
        put("cfl", self.cfl.map(|v| v.to_string()));
        put("nu", self.nu.map(|v| v.to_string()));
        put("primal_tol", self.primal_tol.map(|v| v.to_string()));
        put("primal_max_iters", self.primal_max_iters.map(|v| v.to_string()));
        put("adjoint_mode", s(&self.adjoint_mode));
        put("adjoint_iters", self.adjoint_iters.map(|v| v.to_string()));
        put("gmres_restart", self.gmres_restart.map(|v| v.to_string()));
        put("adjoint_tol", s(&self.adjoint_tol));
        put("scheme", s(&self.scheme));
        put("preacc", s(&self.preacc));
        put("shared_read_opt", s(&self.shared_read));
        put("adjoint_vector_opt", s(&self.adjoint_vector_opt));
        put("threads", self.threads.map(|v| v.to_string()));
        put("reps", self.reps.map(|v| v.to_string()));
        put("warmup", self.warmup.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        for (k, v) in pairs {
            cfg.set(k, &v).with_context(|| format!("--{}", k.replace('_', "-")))?;
        }
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects key=value, got `{kv}`");
            };
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn format(&self) -> Result<ReportFormat> {
        Ok(self.report.parse()?)
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn primal(c: &Common) -> Result<()> {
    let cfg = c.build()?;
    let problem = cfg.build_problem()?;
    let x = Params::passive(problem.mesh(), cfg.source);
    let sol = problem.primal_solve(&x, None, cfg.primal_tol, cfg.primal_max_iters)?;
    let g = problem.metrics(&x.coords)?;
    let u: Vec<ActiveScalar> = sol.u.iter().map(|&v| ActiveScalar::new(v)).collect();
    eprintln!(
        "mesh {} ({} points, {} edges), plan {}",
        cfg.mesh,
        problem.num_points(),
        problem.mesh().num_edges(),
        if problem.plan().is_colored() { "colored" } else { "reduction" }
    );
    eprintln!(
        "{} iterations, converged: {}, residual ratio {:.3e}",
        sol.iterations(),
        sol.converged,
        sol.residuals.last().copied().unwrap_or(0.0) / sol.reference.max(f64::MIN_POSITIVE)
    );
    eprintln!("objective {:.15e}", problem.objective(&u, &g).value());
    let mut w = output(&c.out)?;
    writeln!(w, "point,x,y,u")?;
    for (i, (p, v)) in problem.mesh().points().iter().zip(&sol.u).enumerate() {
        writeln!(w, "{i},{:?},{:?},{v:?}", p[0], p[1])?;
    }
    if !sol.converged {
        bail!("primal solve did not converge in {} iterations", cfg.primal_max_iters);
    }
    Ok(())
}

fn adjoint(c: &Common) -> Result<()> {
    let cfg = c.build()?;
    let problem = cfg.build_problem()?;
    let x = Params::passive(problem.mesh(), cfg.source);
    let sol = problem.primal_solve(&x, None, cfg.primal_tol, cfg.primal_max_iters)?;
    if !sol.converged {
        eprintln!("warning: primal solve stopped after {} iterations", sol.iterations());
    }
    let ctx = AdContext::new(cfg.ad_config());
    let ad = ctx.bind()?;
    let mut driver = AdjointDriver::new(&problem, &ad);
    let r = driver.run(&sol.u, &x, &cfg.adjoint)?;
    let (coords, source) = r.sensitivity.split_mesh();
    let status = match (cfg.adjoint.tol, r.adjoint.converged) {
        (None, _) => "fixed iteration count".to_string(),
        (Some(_), c) => format!("converged: {c}"),
    };
    eprintln!(
        "adjoint ({}): {} iterations, {status}, last change {:.3e}",
        cfg.adjoint.mode.name(),
        r.adjoint.iterations,
        r.adjoint.history.last().copied().unwrap_or(0.0)
    );
    eprintln!("dJ/dsource {source:.15e}");
    eprintln!("gradient checksum {:.15e}", r.sensitivity.checksum());
    eprintln!(
        "recording {:.3?}, management {:.3?}, evaluation {:.3?}",
        r.times.recording, r.times.management, r.times.evaluation
    );
    eprintln!(
        "primary tape {} statements, {} bytes; secondary tape {} bytes",
        r.primary_stats.total.statements, r.primary_stats.total.bytes, r.sensitivity.stats.total.bytes
    );
    let mut w = output(&c.out)?;
    writeln!(w, "point,x,y,dj_dx,dj_dy")?;
    for (i, (p, d)) in problem.mesh().points().iter().zip(&coords).enumerate() {
        writeln!(w, "{i},{:?},{:?},{:?},{:?}", p[0], p[1], d[0], d[1])?;
    }
    Ok(())
}

fn bench(c: &Common) -> Result<()> {
    let cfg = c.build()?;
    let format = c.format()?;
    let report = match run_benchmark(&cfg) {
        Ok(r) => r,
        Err(partape_bench::BenchError::Phase { partial, phase, message }) => {
            emit_report(&[*partial], format, c.out.as_deref())?;
            bail!("{phase} failed: {message}");
        }
        Err(e) => return Err(e.into()),
    };
    emit_report(&[report], format, c.out.as_deref())?;
    Ok(())
}

fn matrix(c: &Common, axes: &[String]) -> Result<()> {
    let cfg = c.build()?;
    let format = c.format()?;
    let axes: Vec<Axis> = axes.iter().map(|a| a.parse()).collect::<Result<_, _>>()?;
    let reports = run_matrix(&cfg, &axes);
    for r in reports.iter().filter_map(|r| r.error.as_ref()) {
        eprintln!("cell failed: {r}");
    }
    emit_report(&reports, format, c.out.as_deref())?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Primal(c) => primal(c),
        Command::Adjoint(c) => adjoint(c),
        Command::Bench(c) => bench(c),
        Command::Matrix { common, axes } => matrix(common, axes),
    }
}
