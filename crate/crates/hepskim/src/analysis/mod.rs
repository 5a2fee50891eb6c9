//! The two-pass workflow: sum of weights, skim and slim to an ntuple,
//! weighted histograms and stacked plot data.

mod config;
mod pipeline;
mod plot;

use std::io;
use std::path::PathBuf;

use hepskim_core::HistogramError;
use thiserror::Error;

use crate::engine::EngineError;
use crate::storage::StorageError;

pub use config::{
    Analysis, AnalysisConfig, ColumnEntry, CustomPlan, DatasetEntry, HistogramEntry, PartitionEntry, RangeEntry,
};
pub use pipeline::{fill_histograms, open_dataset, run_skim, sum_of_weights, HistogramSet, SkimResult};
pub use plot::{build_plot_bundle, histograms_json, plot_csv, Component, PlotBundle, PlotHistogram, Series};

/// Name of the column appended to every skim output.
pub const WEIGHT_COLUMN: &str = "weight";

/// A representative missing-energy selection: large MET, lepton veto, at
/// least one hard jet. Not a published selection.
pub const DEFAULT_SELECTION: &str =
    "met.pt > 200.0 and size(muons) == 0 and size(electrons) == 0 and count(jets, it.pt > 30.0) >= 1";

pub const DEFAULT_PROJECTION: &[(&str, &str)] = &[
    ("met_pt", "met.pt"),
    ("met_phi", "met.phi"),
    ("njets", "count(jets, it.pt > 30.0)"),
    ("ht", "sum(jets, it.pt)"),
    ("lead_jet_pt", "max(jets, it.pt)"),
    ("ntaus", "size(taus)"),
];

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("config: {0}")]
    Config(String),
    #[error("dataset `{label}` is {kind}; this operation needs an mc dataset")]
    KindMismatch { label: String, kind: &'static str },
    #[error("no dataset labelled `{0}`")]
    UnknownDataset(String),
    #[error("dataset `{label}`: files do not carry the analysis schema")]
    SchemaMismatch { label: String },
    #[error("dataset `{label}`: sum of generator weights is zero; cannot normalize")]
    ZeroSumOfWeights { label: String },
    #[error("dataset `{label}`: {source}")]
    Engine { label: String, source: EngineError },
    #[error("{}: {source}", path.display())]
    Storage { path: PathBuf, source: StorageError },
    #[error(transparent)]
    Histogram(#[from] HistogramError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}
