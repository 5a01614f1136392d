//! Config-driven runner for the linstab experiments.
//!
//! A run reads one JSON document, dispatches to a single experiment, writes
//! its CSV tables and a `report.json` with the config echo, per-stage wall
//! times, a SHA-256 manifest of every CSV and the pass/fail state of each
//! asserted contract.

pub mod config;
mod experiments;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

pub use config::{validate, validate_value, ConfigErrors, Experiment, ExperimentConfig};
pub use output::{ManifestEntry, Table};

/// Environment variable that overrides `output_dir` (a `--output-dir` flag wins over it).
pub const OUTPUT_DIR_ENV: &str = "LINSTAB_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: String, source: linstab::Error },
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 3,
            RunError::Stage { .. } => 4,
            RunError::Io { .. } => 5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub wall_seconds: f64,
}

/// One asserted contract of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvEcho {
    #[serde(rename = "LINSTAB_OUTPUT_DIR")]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub experiment: Experiment,
    pub version: &'static str,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub env: EnvEcho,
    pub stages: Vec<StageTime>,
    pub manifest: Vec<ManifestEntry>,
    pub results: Value,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Overrides applied on top of a config document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Value of [`OUTPUT_DIR_ENV`], if set.
    pub env_output_dir: Option<String>,
}

/// Parses and validates `text`, applying the seed override before
/// validation (so `--seed` satisfies the seed requirement) and the output
/// directory override after it.
pub fn load_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, ConfigErrors> {
    let mut doc: Value =
        serde_json::from_str(text).map_err(|e| ConfigErrors(vec![format!("not valid JSON: {e}")]))?;
    if let (Some(seed), Some(obj)) = (overrides.seed, doc.as_object_mut()) {
        obj.insert("seed".into(), seed.into());
    }
    let mut config = validate_value(&doc)?;
    if let Some(dir) = &overrides.output_dir {
        config.output_dir = dir.clone();
    } else if let Some(dir) = overrides.env_output_dir.as_deref().filter(|d| !d.is_empty()) {
        config.output_dir = PathBuf::from(dir);
    }
    Ok(config)
}

/// Collects timings, tables and checks while an experiment runs.
pub(crate) struct Recorder {
    stages: Vec<StageTime>,
    tables: Vec<Table>,
    checks: Vec<Check>,
}

impl Recorder {
    pub(crate) fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> linstab::Result<T>) -> Result<T, RunError> {
        let start = Instant::now();
        let out = f().map_err(|source| RunError::Stage { stage: name.into(), source });
        self.stages.push(StageTime { stage: name.into(), wall_seconds: start.elapsed().as_secs_f64() });
        out
    }

    pub(crate) fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub(crate) fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }
}

/// Runs the configured experiment and writes its outputs.
pub fn run(config: &ExperimentConfig, env: EnvEcho) -> Result<RunReport, RunError> {
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
    let mut rec = Recorder { stages: Vec::new(), tables: Vec::new(), checks: Vec::new() };
    let results = experiments::dispatch(config, &mut rec)?;

    let mut manifest = Vec::new();
    for t in &rec.tables {
        let start = Instant::now();
        manifest.push(output::write_file(dir, &t.name, &t.to_bytes())?);
        rec.stages.push(StageTime { stage: format!("write {}", t.name), wall_seconds: start.elapsed().as_secs_f64() });
    }
    let passed = rec.checks.iter().all(|c| c.passed);
    let report = RunReport {
        experiment: config.experiment,
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        config: config.clone(),
        env,
        stages: rec.stages,
        manifest,
        results,
        checks: rec.checks,
        passed,
    };
    let json = serde_json::to_vec_pretty(&report).expect("report serialises");
    output::write_file(dir, "report.json", &json)?;
    Ok(report)
}

/// Path of `report.json` for a config.
pub fn report_path(config: &ExperimentConfig) -> PathBuf {
    Path::new(&config.output_dir).join("report.json")
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
