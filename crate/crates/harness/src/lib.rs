//! Experiment runner: loop-detection effectiveness, path-length CDF and
//! Distinct-Match micro-benchmarks, each written as CSV.

pub mod config;
pub mod effectiveness;
pub mod fixture;
pub mod microbench;
pub mod pathlen;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig};
pub use effectiveness::{rows_from_log, run_effectiveness, Effectiveness, ResultRow, Summary};
pub use fixture::{run_verify_fixture, FixtureRow};
pub use microbench::{bench_cell, run_microbench, BenchRow};
pub use pathlen::{run_pathlen, CdfRow, PathLen};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("topology: {0}")]
    Topology(#[from] prelude_bgpsim::GenerateError),
    #[error(transparent)]
    Ctl(#[from] prelude_ctl::CtlError),
    #[error(transparent)]
    Query(#[from] prelude_core::distinct_match::DistinctMatchError),
    #[error(transparent)]
    Circuit(#[from] prelude_core::circuits::CircuitError),
    #[error("event log: {0}")]
    Log(String),
    #[error("counts differ between repetitions: {0}")]
    Unstable(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Serialises rows with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))
}

/// Writes `bytes` to `dir/name`, creating `dir`; returns the path.
pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, HarnessError> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, bytes))
        .map_err(|source| HarnessError::Write { path: path.clone(), source })?;
    Ok(path)
}
