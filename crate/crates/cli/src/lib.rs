//! Command-line driver: configuration, experiment orchestration and output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

pub use config::{Experiment, ExperimentConfig, GroupField};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 1 usage or I/O, 2 validation, 3 numerical non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Convergence(_) => 3,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    /// One line for stdout.
    pub summary: String,
    /// Set when a check the experiment performs fails; artifacts are still written.
    pub failed_check: Option<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failed_check.is_some() {
            2
        } else {
            0
        }
    }
}

/// Runs the configured experiment on its own thread pool.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let experiment = cfg.experiment.ok_or_else(|| CliError::Usage("no experiment selected".into()))?;
    let threads = cfg.thread_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    pool.install(|| experiments::dispatch(experiment, cfg))
}
