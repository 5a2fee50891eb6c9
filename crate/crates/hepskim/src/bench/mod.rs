//! Synthetic corpora and the phase-separated benchmark harness.

mod generator;
mod harness;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::engine::EngineError;
use crate::storage::StorageError;

pub use generator::{generate, generate_corpus, GeneratorSpec, WeightDist};
pub use harness::{
    compare_reports, reports_csv, reports_json, run_benchmark, BenchInputs, Comparison, MatrixCell, PhaseTimes,
    TimingReport,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("benchmarks need at least 3 repetitions, got {0}")]
    InvalidRepetitions(usize),
    #[error("reports are not comparable: {0}")]
    IncomparableConfigs(String),
    #[error("repetitions of {cell} produced different outputs")]
    NonDeterministic { cell: String },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("dataset `{label}`: {source}")]
    Engine { label: String, source: EngineError },
    #[error("{}: {source}", path.display())]
    Storage { path: PathBuf, source: StorageError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}
