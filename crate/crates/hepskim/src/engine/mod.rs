//! Partitioned datasets over EVT files, an explicit in-memory cache, and
//! order-deterministic parallel traversal.

mod dataset;
pub mod pool;

use std::path::PathBuf;

use hepskim_core::plan::PlanError;
use thiserror::Error;

use crate::storage::StorageError;

pub use dataset::{match_files, PartitionedDataset, TraversalStats, Warning, WriteOutcome};

/// Default auto-planner target: 32 MiB of stored block bytes per partition.
pub const DEFAULT_TARGET_BYTES: u64 = 32 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Data,
    Mc,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Data => "data",
            DatasetKind::Mc => "mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetDescriptor {
    pub glob: String,
    pub kind: DatasetKind,
    /// Picobarns; present exactly for mc.
    pub cross_section_pb: Option<f64>,
    pub label: String,
}

impl DatasetDescriptor {
    pub fn data(label: impl Into<String>, glob: impl Into<String>) -> Self {
        DatasetDescriptor {
            glob: glob.into(),
            kind: DatasetKind::Data,
            cross_section_pb: None,
            label: label.into(),
        }
    }

    pub fn mc(label: impl Into<String>, glob: impl Into<String>, cross_section_pb: f64) -> Self {
        DatasetDescriptor {
            glob: glob.into(),
            kind: DatasetKind::Mc,
            cross_section_pb: Some(cross_section_pb),
            label: label.into(),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidDescriptor(format!("dataset `{}`: {m}", self.label)));
        match (self.kind, self.cross_section_pb) {
            (DatasetKind::Mc, None) => bad("mc datasets need a cross section".into()),
            (DatasetKind::Mc, Some(x)) if !(x.is_finite() && x > 0.0) => {
                bad(format!("cross section must be finite and > 0, got {x}"))
            }
            (DatasetKind::Data, Some(_)) => bad("data datasets must not carry a cross section".into()),
            _ => Ok(()),
        }
    }
}

/// An explicit block range of one file. `file` matches a file's full path or its file name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitRange {
    pub file: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionMode {
    /// Greedy packing of whole blocks up to a byte target.
    Auto { target_bytes: u64 },
    /// Each file split into N near-equal block ranges.
    PerFile(usize),
    /// Ranges listed by hand; must tile every file.
    Explicit(Vec<ExplicitRange>),
}

impl Default for PartitionMode {
    fn default() -> Self {
        PartitionMode::Auto {
            target_bytes: DEFAULT_TARGET_BYTES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub workers: usize,
    /// Upper bound on cached decoded bytes; `None` is unbounded.
    pub cache_budget_bytes: Option<u64>,
    pub partition: PartitionMode,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            workers: default_workers(),
            cache_budget_bytes: None,
            partition: PartitionMode::default(),
        }
    }
}

impl EngineConfig {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_partition(mut self, partition: PartitionMode) -> Self {
        self.partition = partition;
        self
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid dataset: {0}")]
    InvalidDescriptor(String),
    #[error("invalid glob `{glob}`: {reason}")]
    BadGlob { glob: String, reason: String },
    #[error("no files match `{glob}`")]
    NoFilesMatched { glob: String },
    #[error("cannot read {}: {source}", path.display())]
    UnreadableFile { path: PathBuf, source: StorageError },
    #[error("{} has a different schema than {}", path.display(), first.display())]
    SchemaMismatch { path: PathBuf, first: PathBuf },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("partition {partition} ({}): {source}", file.display())]
    Partition {
        partition: usize,
        file: PathBuf,
        source: StorageError,
    },
    #[error("writing {}: {source}", path.display())]
    Sink { path: PathBuf, source: StorageError },
    #[error("worker count must be at least 1")]
    NoWorkers,
}

impl EngineError {
    /// The underlying storage error, if any.
    pub fn storage(&self) -> Option<&StorageError> {
        match self {
            EngineError::UnreadableFile { source, .. }
            | EngineError::Partition { source, .. }
            | EngineError::Sink { source, .. } => Some(source),
            _ => None,
        }
    }
}
