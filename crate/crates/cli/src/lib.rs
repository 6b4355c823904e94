//! Configuration-driven experiment runner: parses a config, schedules
//! replicate batches on a worker pool, and writes hash-stamped CSV and JSON
//! tables.

pub mod commands;
pub mod config;
pub mod output;

use std::ops::Range;

use branchlab_core::brw::Replicated;
use rayon::prelude::*;

pub use config::Config;
pub use output::{Cell, Report};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation(String),
    Budget(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Budget(m) => write!(f, "budget exhausted: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<branchlab_core::Error> for CliError {
    fn from(e: branchlab_core::Error) -> Self {
        match e {
            branchlab_core::Error::RejectionBudget { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// Replicates per scheduled batch. Batches are fixed by the replicate count
/// alone and merged in order, so the thread count never changes a result.
pub const BATCH: u64 = 64;

pub fn run_parallel<R: Replicated>(job: &R, reps: u64) -> R::Acc {
    let batches: Vec<Range<u64>> = (0..reps.div_ceil(BATCH))
        .map(|b| b * BATCH..((b + 1) * BATCH).min(reps))
        .collect();
    let parts: Vec<R::Acc> = batches.into_par_iter().map(|r| job.run_range(r)).collect();
    let mut acc = R::Acc::default();
    for p in parts {
        R::merge(&mut acc, p);
    }
    acc
}

/// Runs `command` on a pool of `threads` workers (all cores if `None`).
pub fn execute(command: &str, config: &Config, threads: Option<usize>) -> Result<Report, CliError> {
    config.validate(command)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    pool.install(|| commands::dispatch(command, config))
}
