//! Aggregated measurements and their CSV / JSON form.

use std::io::Write;
use std::path::Path;
use std::time::Duration;

use partape::TapeStats;
use serde::{Deserialize, Serialize};

use crate::config::BenchConfig;
use crate::error::BenchError;

/// Mean and spread of one phase over the measured repetitions, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseStat {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl PhaseStat {
    pub fn from_samples(xs: &[Duration]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let s: Vec<f64> = xs.iter().map(Duration::as_secs_f64).collect();
        Self {
            mean: s.iter().sum::<f64>() / s.len() as f64,
            min: s.iter().copied().fold(f64::INFINITY, f64::min),
            max: s.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// Timings and counts of one repetition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sample {
    pub recording: Duration,
    pub management: Duration,
    pub evaluation: Duration,
    pub total: Duration,
}

impl Sample {
    pub fn non_ad(&self) -> Duration {
        self.total
            .saturating_sub(self.recording + self.management + self.evaluation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub config: BenchConfig,
    /// `colored` or `reduction`.
    pub plan: String,
    pub effective_group_size: Option<usize>,
    pub colors: Option<usize>,
    pub points: usize,
    pub edges: usize,
    pub primal_iterations: usize,
    pub primal_converged: bool,
    pub samples: Vec<Sample>,
    pub recording: PhaseStat,
    pub management: PhaseStat,
    pub evaluation: PhaseStat,
    pub non_ad: PhaseStat,
    pub total: PhaseStat,
    pub primary_tape: TapeStats,
    pub secondary_tape: TapeStats,
    /// Per-thread statistics of the larger of the two recordings.
    pub tape_per_thread: Vec<TapeStats>,
    pub adjoint_capacity: usize,
    /// Peak resident set size of the process, where the OS reports it.
    pub max_rss_kb: Option<u64>,
    pub adjoint_iterations: usize,
    pub adjoint_converged: bool,
    pub objective: f64,
    /// `sum |dJ/dX|` over all parameters.
    pub gradient_checksum: f64,
    pub error: Option<String>,
}

impl BenchReport {
    pub fn new(config: BenchConfig) -> Self {
        Self {
            config,
            plan: String::new(),
            effective_group_size: None,
            colors: None,
            points: 0,
            edges: 0,
            primal_iterations: 0,
            primal_converged: false,
            samples: Vec::new(),
            recording: PhaseStat::default(),
            management: PhaseStat::default(),
            evaluation: PhaseStat::default(),
            non_ad: PhaseStat::default(),
            total: PhaseStat::default(),
            primary_tape: TapeStats::default(),
            secondary_tape: TapeStats::default(),
            tape_per_thread: Vec::new(),
            adjoint_capacity: 0,
            max_rss_kb: None,
            adjoint_iterations: 0,
            adjoint_converged: false,
            objective: f64::NAN,
            gradient_checksum: f64::NAN,
            error: None,
        }
    }

    /// High-water tape statistics over the two recordings.
    pub fn tape(&self) -> TapeStats {
        if self.secondary_tape.bytes > self.primary_tape.bytes {
            self.secondary_tape
        } else {
            self.primary_tape
        }
    }

    pub(crate) fn aggregate(&mut self) {
        let pick = |f: fn(&Sample) -> Duration| -> Vec<Duration> { self.samples.iter().map(f).collect() };
        self.recording = PhaseStat::from_samples(&pick(|s| s.recording));
        self.management = PhaseStat::from_samples(&pick(|s| s.management));
        self.evaluation = PhaseStat::from_samples(&pick(|s| s.evaluation));
        self.non_ad = PhaseStat::from_samples(&pick(Sample::non_ad));
        self.total = PhaseStat::from_samples(&pick(|s| s.total));
    }

    pub fn row(&self) -> ReportRow {
        let c = &self.config;
        let tape = self.tape();
        ReportRow {
            scheme: c.scheme.name().into(),
            preacc: c.preacc.name().into(),
            shared_read_opt: c.shared_read_opt,
            adjoint_vector_opt: c.adjoint_vector_opt,
            threads: c.threads,
            loop_strategy: c.loop_strategy.name().into(),
            group_size: c.group_size,
            relax: c.relax,
            plan: self.plan.clone(),
            effective_group_size: self.effective_group_size,
            colors: self.colors,
            adjoint_mode: c.adjoint.mode.name().into(),
            adjoint_iters: c.adjoint.iters,
            mesh: c.mesh.to_string(),
            points: self.points,
            edges: self.edges,
            repetitions: c.repetitions,
            warmup: c.warmup,
            recording_mean: self.recording.mean,
            recording_min: self.recording.min,
            recording_max: self.recording.max,
            management_mean: self.management.mean,
            management_min: self.management.min,
            management_max: self.management.max,
            evaluation_mean: self.evaluation.mean,
            evaluation_min: self.evaluation.min,
            evaluation_max: self.evaluation.max,
            non_ad_mean: self.non_ad.mean,
            non_ad_min: self.non_ad.min,
            non_ad_max: self.non_ad.max,
            total_mean: self.total.mean,
            total_min: self.total.min,
            total_max: self.total.max,
            tape_bytes: tape.bytes,
            tape_statements: tape.statements,
            tape_arg_entries: tape.arg_entries,
            primary_tape_bytes: self.primary_tape.bytes,
            secondary_tape_bytes: self.secondary_tape.bytes,
            tape_bytes_per_thread: self
                .tape_per_thread
                .iter()
                .map(|t| t.bytes.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            adjoint_capacity: self.adjoint_capacity,
            max_rss_kb: self.max_rss_kb,
            primal_iterations: self.primal_iterations,
            adjoint_iterations: self.adjoint_iterations,
            adjoint_converged: self.adjoint_converged,
            objective: finite(self.objective),
            gradient_checksum: finite(self.gradient_checksum),
            error: self.error.clone().unwrap_or_default(),
        }
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// One flat report line; the CSV header is the field list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: String,
    pub preacc: String,
    pub shared_read_opt: bool,
    pub adjoint_vector_opt: bool,
    pub threads: usize,
    pub loop_strategy: String,
    pub group_size: usize,
    pub relax: bool,
    pub plan: String,
    pub effective_group_size: Option<usize>,
    pub colors: Option<usize>,
    pub adjoint_mode: String,
    pub adjoint_iters: usize,
    pub mesh: String,
    pub points: usize,
    pub edges: usize,
    pub repetitions: usize,
    pub warmup: usize,
    pub recording_mean: f64,
    pub recording_min: f64,
    pub recording_max: f64,
    pub management_mean: f64,
    pub management_min: f64,
    pub management_max: f64,
    pub evaluation_mean: f64,
    pub evaluation_min: f64,
    pub evaluation_max: f64,
    pub non_ad_mean: f64,
    pub non_ad_min: f64,
    pub non_ad_max: f64,
    pub total_mean: f64,
    pub total_min: f64,
    pub total_max: f64,
    pub tape_bytes: usize,
    pub tape_statements: usize,
    pub tape_arg_entries: usize,
    pub primary_tape_bytes: usize,
    pub secondary_tape_bytes: usize,
    pub tape_bytes_per_thread: String,
    pub adjoint_capacity: usize,
    pub max_rss_kb: Option<u64>,
    pub primal_iterations: usize,
    pub adjoint_iterations: usize,
    pub adjoint_converged: bool,
    pub objective: Option<f64>,
    pub gradient_checksum: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(BenchError::Config(format!("unknown report format `{s}`"))),
        }
    }
}

pub fn write_report(reports: &[BenchReport], format: ReportFormat, out: impl Write) -> Result<(), BenchError> {
    if reports.is_empty() {
        return Err(BenchError::EmptyReport);
    }
    let rows: Vec<ReportRow> = reports.iter().map(BenchReport::row).collect();
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit_report(reports: &[BenchReport], format: ReportFormat, path: Option<&Path>) -> Result<(), BenchError> {
    match path {
        Some(p) => write_report(reports, format, std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => write_report(reports, format, std::io::stdout().lock()),
    }
}

/// Parses rows written by [`write_report`].
pub fn read_rows(text: &str, format: ReportFormat) -> Result<Vec<ReportRow>, BenchError> {
    match format {
        ReportFormat::Csv => Ok(csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()?),
        ReportFormat::Json => Ok(serde_json::from_str(text)?),
    }
}

/// Peak resident set size from `/proc/self/status`.
pub fn max_rss_kb() -> Option<u64> {
    let s = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = s.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}
