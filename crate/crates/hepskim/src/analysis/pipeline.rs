use std::path::{Path, PathBuf};

use hepskim_core::expr::{parse_expr, typecheck};
use hepskim_core::reduce::Combine;
use hepskim_core::weight::normalize_weight;
use hepskim_core::{analysis_schema, Histogram, NtupleRow, Scalar, TypedExpr};

use super::{Analysis, AnalysisError, WEIGHT_COLUMN};
use crate::engine::{pool, DatasetDescriptor, DatasetKind, PartitionedDataset, TraversalStats, Warning, WriteOutcome};
use crate::storage::read_ntu;

fn weight_expr() -> TypedExpr {
    let schema = analysis_schema();
    typecheck(&parse_expr("genInfo.weight").expect("valid path"), &schema).expect("weight field exists")
}

fn engine_err(label: &str) -> impl FnOnce(crate::engine::EngineError) -> AnalysisError + '_ {
    move |source| AnalysisError::Engine {
        label: label.to_string(),
        source,
    }
}

/// Opens a dataset with the analysis engine settings and checks its schema.
pub fn open_dataset(analysis: &Analysis, descriptor: &DatasetDescriptor) -> Result<PartitionedDataset, AnalysisError> {
    let ds = PartitionedDataset::open(descriptor.clone(), &analysis.engine).map_err(engine_err(&descriptor.label))?;
    if ds.schema().is_some_and(|s| *s != analysis_schema()) {
        return Err(AnalysisError::SchemaMismatch {
            label: descriptor.label.clone(),
        });
    }
    Ok(ds)
}

/// Pass 1: the sum of generator weights of an mc dataset.
pub fn sum_of_weights(ds: &PartitionedDataset) -> Result<(f64, TraversalStats), AnalysisError> {
    let d = ds.descriptor();
    if d.kind != DatasetKind::Mc {
        return Err(AnalysisError::KindMismatch {
            label: d.label.clone(),
            kind: d.kind.name(),
        });
    }
    let w = weight_expr();
    ds.map_reduce(|e| w.eval_f64(e), Combine::Sum)
        .map_err(engine_err(&d.label))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkimResult {
    pub label: String,
    pub kind: DatasetKind,
    pub input_events: u64,
    pub input_bytes: u64,
    pub rows: u64,
    pub output: PathBuf,
    pub sum_of_weights: Option<f64>,
    /// The sum-of-weights traversal, mc only.
    pub first_pass: Option<TraversalStats>,
    pub outcome: WriteOutcome,
    pub warnings: Vec<Warning>,
}

impl SkimResult {
    /// Output rows per input event.
    pub fn reduction(&self) -> f64 {
        if self.input_events == 0 {
            0.0
        } else {
            self.rows as f64 / self.input_events as f64
        }
    }
}

/// Runs both passes over one dataset and writes `out`. For mc the weight
/// column holds `w * xsec * lumi / sumw`; for data it is 1.0.
pub fn run_skim(analysis: &Analysis, ds: &PartitionedDataset, out: &Path) -> Result<SkimResult, AnalysisError> {
    let d = ds.descriptor();
    let mut proj = analysis.projection.clone();
    proj.push(WEIGHT_COLUMN, weight_expr())
        .expect("weight column name is reserved");
    let (sumw, first_pass) = match d.kind {
        DatasetKind::Mc => {
            if analysis.persist {
                ds.persist();
            }
            let (sumw, stats) = sum_of_weights(ds)?;
            if sumw == 0.0 {
                return Err(AnalysisError::ZeroSumOfWeights { label: d.label.clone() });
            }
            (Some(sumw), Some(stats))
        }
        DatasetKind::Data => (None, None),
    };
    let xsec = d.cross_section_pb.unwrap_or(0.0);
    let lumi = analysis.luminosity_invpb;
    let finalize = |mut row: NtupleRow| {
        if let Some(last) = row.last_mut() {
            *last = Scalar::F64(match sumw {
                Some(s) => normalize_weight(last.as_f64(), xsec, lumi, s).expect("sum checked non-zero"),
                None => 1.0,
            });
        }
        row
    };
    let outcome = ds
        .filter_map_write(
            &analysis.cut,
            &proj,
            finalize,
            &analysis.columns,
            out,
            analysis.group_rows,
        )
        .map_err(engine_err(&d.label))?;
    Ok(SkimResult {
        label: d.label.clone(),
        kind: d.kind,
        input_events: ds.total_events(),
        input_bytes: ds.total_bytes(),
        rows: outcome.rows,
        output: out.to_path_buf(),
        sum_of_weights: sumw,
        first_pass,
        outcome,
        warnings: ds.warnings(),
    })
}

/// Histograms of one dataset, one per analysis histogram spec.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSet {
    pub label: String,
    pub kind: DatasetKind,
    pub histograms: Vec<Histogram>,
}

/// Fills every analysis histogram from a skim output. Each row group is
/// filled into private partials on the worker pool; partials are merged in
/// group order.
pub fn fill_histograms(
    analysis: &Analysis,
    descriptor: &DatasetDescriptor,
    ntu: &Path,
    workers: usize,
) -> Result<HistogramSet, AnalysisError> {
    let mut names: Vec<&str> = vec![WEIGHT_COLUMN];
    for h in &analysis.histograms {
        if !names.contains(&h.variable.as_str()) {
            names.push(&h.variable);
        }
    }
    let data = read_ntu(ntu, Some(&names)).map_err(|source| AnalysisError::Storage {
        path: ntu.to_path_buf(),
        source,
    })?;
    let column = |name: &str| data.get(name).expect("requested column").to_f64();
    let weights = column(WEIGHT_COLUMN);
    let values: Vec<Vec<f64>> = analysis.histograms.iter().map(|h| column(&h.variable)).collect();

    let mut bounds = Vec::with_capacity(data.group_rows.len());
    let mut start = 0usize;
    for &n in &data.group_rows {
        bounds.push(start..start + n as usize);
        start += n as usize;
    }
    let partials: Vec<Vec<Histogram>> = pool::run_indexed(bounds.len(), workers, |g| {
        let r = bounds[g].clone();
        analysis
            .histograms
            .iter()
            .zip(&values)
            .map(|(spec, v)| {
                hepskim_core::fill_histogram(&v[r.clone()], &weights[r.clone()], spec).expect("validated spec")
            })
            .collect()
    });
    let mut histograms = Vec::with_capacity(analysis.histograms.len());
    for (i, spec) in analysis.histograms.iter().enumerate() {
        let mut h = Histogram::new(spec.clone())?;
        for p in &partials {
            h.merge(&p[i])?;
        }
        histograms.push(h);
    }
    Ok(HistogramSet {
        label: descriptor.label.clone(),
        kind: descriptor.kind,
        histograms,
    })
}
