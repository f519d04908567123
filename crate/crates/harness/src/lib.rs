//! Configuration, presets, execution and artifact writing for the semiclassical workbench.

pub mod config;
pub mod experiments;
pub mod output;
pub mod presets;

use config::{ConfigError, ExperimentConfig};
use output::RunOutput;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_BAND: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Run(#[from] semiclassical::Error),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Capacity and contract violations come from the requested parameters, so they count as
    /// config errors; everything else is a numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Run(semiclassical::Error::Capacity(_) | semiclassical::Error::Contract(_)) => EXIT_CONFIG,
            RunError::Run(_) | RunError::Io(_) => EXIT_NUMERICAL,
        }
    }
}

/// Parses `src`, applies command-line overrides, fills defaults and validates.
pub fn load(src: &str, seed: Option<u64>, output: Option<PathBuf>) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::parse(src)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if output.is_some() {
        cfg.output = output;
    }
    cfg.resolved_against(src)
}

/// Artifact directory: the configured one or `runs/<name>`.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| Path::new("runs").join(&cfg.name))
}

/// Runs a resolved config and writes its artifacts.
pub fn run(cfg: &ExperimentConfig, jobs: usize) -> Result<RunOutput, RunError> {
    let output = experiments::execute(cfg, jobs)?;
    let echo = serde_json::to_value(cfg).map_err(std::io::Error::other)?;
    let log = vec![
        format!("scwb {}", env!("CARGO_PKG_VERSION")),
        format!("experiment {} ({})", cfg.name, cfg.kind.label()),
        format!("seed {}", cfg.seed),
        format!("jobs {jobs}"),
        format!("result {}", if output.summary.pass { "pass" } else { "band failure" }),
    ];
    output::write_artifacts(&output_dir(cfg), &echo, &output, &log)?;
    Ok(output)
}

/// Exit status for a finished run.
pub fn exit_code(result: &Result<RunOutput, RunError>) -> i32 {
    match result {
        Ok(out) if out.summary.pass => EXIT_PASS,
        Ok(_) => EXIT_BAND,
        Err(e) => e.exit_code(),
    }
}
