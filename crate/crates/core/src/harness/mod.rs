//! Experiment runner: configuration, persisted traces and summaries, and
//! convergence-rate diagnostics.

pub mod config;
pub mod rate;
pub mod summary;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

pub use config::{ExperimentConfig, Mode, ModelKind, DEFAULT_DYNAMIC_ROUNDS, DEFAULT_STATIC_ROUNDS};
pub use rate::rate_fit;
pub use summary::{summarize, summarize_dynamic, BoundCheck, CheckStatus, SummaryReport};

pub use crate::trace::{read_csv, write_csv};

use crate::coordinators::{run_static, RunResult, StaticConfig};
use crate::error::Result;
use crate::firm::FirmInstance;
use crate::oracle::{self, OracleSolution};
use crate::scenario::{run_dynamic, ScenarioStream};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone)]
pub struct Experiment {
    pub run: RunResult,
    pub summary: SummaryReport,
    /// The sampled firm of a static run.
    pub instance: Option<FirmInstance>,
    pub oracle: Option<OracleSolution>,
}

/// The firm a static experiment runs on: the first instance of the seeded stream.
pub fn static_instance(cfg: &ExperimentConfig) -> Result<FirmInstance> {
    ScenarioStream::new(cfg.sampler_spec())?.sample_instance()
}

/// Runs the experiment and, when `cfg.out` is set, writes the trace and summary there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.validate()?;
    let experiment = match cfg.mode {
        Mode::Static => {
            let instance = static_instance(cfg)?;
            let static_cfg = StaticConfig { eta: cfg.eta, ..StaticConfig::new(cfg.algo, cfg.total_rounds()) };
            let mut run = run_static(&instance, &static_cfg)?;
            let sol = oracle::solve(&instance, oracle::default_tolerance(instance.d()))?;
            if cfg.with_oracle {
                for rec in &mut run.trace {
                    rec.oracle_gap = Some(sol.f_star - rec.primal);
                }
            }
            let summary = summarize(cfg, &instance, &run, Some(&sol))?;
            Experiment { run, summary, instance: Some(instance), oracle: Some(sol) }
        }
        Mode::Dynamic => {
            let dynamic = run_dynamic(&cfg.sampler_spec(), cfg.total_rounds(), cfg.with_oracle)?;
            let summary = summarize_dynamic(cfg, &dynamic)?;
            Experiment { run: dynamic.run, summary, instance: None, oracle: None }
        }
    };
    if let Some(dir) = &cfg.out {
        write_outputs(dir, &experiment)?;
    }
    Ok(experiment)
}

pub fn write_outputs(dir: &Path, experiment: &Experiment) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(BufWriter::new(File::create(dir.join(TRACE_FILE))?), &experiment.run.trace)?;
    write_json(&dir.join(SUMMARY_FILE), &experiment.summary)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// `(T, ||mean excess over the first T rounds||)` at powers of two up to the trace length.
pub fn average_excess_checkpoints(run: &RunResult) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut t = 1usize;
    while t <= run.trace.len() {
        out.push((t as f64, crate::linalg::norm(&run.trace[t - 1].running_avg_excess)));
        t *= 2;
    }
    out
}
