use std::fs;
use std::path::{Path, PathBuf};

use hepskim_core::reduce::Combine;
use serde::Serialize;

use super::BenchError;
use crate::analysis::{run_skim, Analysis, SkimResult};
use crate::engine::{match_files, DatasetDescriptor, DatasetKind, PartitionedDataset, TraversalStats};
use crate::storage::{convert_evt, WriteOptions, DEFAULT_BLOCK_EVENTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MatrixCell {
    pub cached: bool,
    pub compressed: bool,
    pub workers: usize,
}

impl MatrixCell {
    pub fn tag(&self) -> String {
        format!(
            "{}-{}-w{}",
            if self.cached { "cached" } else { "uncached" },
            if self.compressed { "deflate" } else { "plain" },
            self.workers
        )
    }
}

/// Plain and deflate copies of one dataset's files.
#[derive(Debug, Clone)]
pub struct BenchInputs {
    pub descriptor: DatasetDescriptor,
    pub plain: Vec<PathBuf>,
    pub deflate: Vec<PathBuf>,
}

impl BenchInputs {
    /// Converts every file of dataset `label` into `work_dir/plain` and `work_dir/deflate`.
    pub fn prepare(analysis: &Analysis, label: &str, work_dir: &Path) -> Result<Self, BenchError> {
        let descriptor = analysis.dataset(label)?.clone();
        let files = match_files(&descriptor.glob).map_err(|source| BenchError::Engine {
            label: label.to_string(),
            source,
        })?;
        let mut plain = Vec::with_capacity(files.len());
        let mut deflate = Vec::with_capacity(files.len());
        for (sub, compress, out) in [("plain", false, &mut plain), ("deflate", true, &mut deflate)] {
            let dir = work_dir.join(sub);
            fs::create_dir_all(&dir).map_err(|source| BenchError::Io {
                path: dir.clone(),
                source,
            })?;
            for f in &files {
                let dest = dir.join(f.file_name().expect("matched files have names"));
                let opts = WriteOptions {
                    compress,
                    block_events: DEFAULT_BLOCK_EVENTS,
                };
                convert_evt(f, &dest, opts).map_err(|source| BenchError::Storage {
                    path: f.clone(),
                    source,
                })?;
                out.push(dest);
            }
        }
        Ok(BenchInputs {
            descriptor,
            plain,
            deflate,
        })
    }
}

/// Seconds per phase of one measured pass, plus its byte counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub read: f64,
    pub decode: f64,
    pub compute: f64,
    pub write: f64,
    pub total: f64,
    pub storage_bytes: u64,
    pub decoded_bytes: u64,
    pub cache_hits: u64,
}

impl PhaseTimes {
    /// The combined "read and compute" figure: read + decode + compute.
    pub fn read_compute(&self) -> f64 {
        self.read + self.decode + self.compute
    }

    /// Phase sums are per partition; with several workers they are scaled so
    /// that read + decode + compute equals the traversal's wall time.
    fn from_traversal(s: &TraversalStats, workers: usize) -> Self {
        let (mut read, mut decode, mut compute) =
            (s.read.as_secs_f64(), s.decode.as_secs_f64(), s.compute.as_secs_f64());
        let wall = s.wall.as_secs_f64();
        let sum = read + decode + compute;
        if workers > 1 && sum > 0.0 {
            let k = wall / sum;
            read *= k;
            decode *= k;
            compute *= k;
        }
        PhaseTimes {
            read,
            decode,
            compute,
            write: 0.0,
            total: wall,
            storage_bytes: s.storage_bytes,
            decoded_bytes: s.decoded_bytes,
            cache_hits: s.cache_hits as u64,
        }
    }

    fn from_skim(skim: &SkimResult, workers: usize) -> Self {
        let write = skim.outcome.write.as_secs_f64();
        let mut p = PhaseTimes::from_traversal(&skim.outcome.stats, workers);
        p.write = write;
        p.total += write;
        p
    }

    fn median(reps: &[PhaseTimes]) -> PhaseTimes {
        fn med_f(mut v: Vec<f64>) -> f64 {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            match n {
                0 => 0.0,
                _ if n % 2 == 1 => v[n / 2],
                _ => (v[n / 2 - 1] + v[n / 2]) / 2.0,
            }
        }
        fn med_u(mut v: Vec<u64>) -> u64 {
            v.sort_unstable();
            v.get(v.len().saturating_sub(1) / 2).copied().unwrap_or(0)
        }
        let f = |g: fn(&PhaseTimes) -> f64| med_f(reps.iter().map(g).collect());
        let u = |g: fn(&PhaseTimes) -> u64| med_u(reps.iter().map(g).collect());
        PhaseTimes {
            read: f(|p| p.read),
            decode: f(|p| p.decode),
            compute: f(|p| p.compute),
            write: f(|p| p.write),
            total: f(|p| p.total),
            storage_bytes: u(|p| p.storage_bytes),
            decoded_bytes: u(|p| p.decoded_bytes),
            cache_hits: u(|p| p.cache_hits),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub label: String,
    pub cell: MatrixCell,
    pub events: u64,
    pub input_bytes: u64,
    pub output_rows: u64,
    pub output_bytes: u64,
    pub output_crc32: u32,
    /// Identifies dataset and analysis; reports compare only when equal.
    pub fingerprint: String,
    /// Pass-1 traversal of each repetition (the cache-warming pass when cached).
    pub first_pass: Vec<PhaseTimes>,
    pub first_pass_median: PhaseTimes,
    /// The measured skim pass of each repetition.
    pub repetitions: Vec<PhaseTimes>,
    pub median: PhaseTimes,
}

/// Times the skim pass of `analysis` over one matrix cell. A warm-up
/// repetition runs first and is discarded.
pub fn run_benchmark(
    analysis: &Analysis,
    inputs: &BenchInputs,
    cell: MatrixCell,
    repetitions: usize,
    out_dir: &Path,
) -> Result<TimingReport, BenchError> {
    if repetitions < 3 {
        return Err(BenchError::InvalidRepetitions(repetitions));
    }
    let mut a = analysis.clone();
    a.engine.workers = cell.workers;
    a.persist = cell.cached;
    let d = &inputs.descriptor;
    let files = if cell.compressed {
        &inputs.deflate
    } else {
        &inputs.plain
    };
    let out = out_dir.join(format!("{}-{}.ntu", d.label, cell.tag()));
    let engine_err = |source| BenchError::Engine {
        label: d.label.clone(),
        source,
    };

    let mut first_pass = Vec::with_capacity(repetitions);
    let mut reps = Vec::with_capacity(repetitions);
    let mut last: Option<(SkimResult, u32)> = None;
    for rep in 0..=repetitions {
        let ds = PartitionedDataset::from_files(d.clone(), files.clone(), &a.engine).map_err(engine_err)?;
        let mut warm = None;
        if cell.cached && d.kind == DatasetKind::Data {
            ds.persist();
            warm = Some(ds.map_reduce(|_| 1.0, Combine::Sum).map_err(engine_err)?.1);
        }
        let skim = run_skim(&a, &ds, &out)?;
        let bytes = fs::read(&out).map_err(|source| BenchError::Io {
            path: out.clone(),
            source,
        })?;
        let crc = crc32fast::hash(&bytes);
        if let Some((_, prev)) = &last {
            if *prev != crc {
                return Err(BenchError::NonDeterministic { cell: cell.tag() });
            }
        }
        if rep > 0 {
            if let Some(s) = skim.first_pass.as_ref().or(warm.as_ref()) {
                first_pass.push(PhaseTimes::from_traversal(s, cell.workers));
            }
            reps.push(PhaseTimes::from_skim(&skim, cell.workers));
        }
        last = Some((skim, crc));
    }
    let (skim, crc) = last.expect("at least one repetition");
    Ok(TimingReport {
        label: d.label.clone(),
        cell,
        events: skim.input_events,
        input_bytes: skim.input_bytes,
        output_rows: skim.rows,
        output_bytes: skim.outcome.bytes,
        output_crc32: crc,
        fingerprint: fingerprint(&a, d, skim.input_events),
        first_pass_median: PhaseTimes::median(&first_pass),
        first_pass,
        median: PhaseTimes::median(&reps),
        repetitions: reps,
    })
}

fn fingerprint(a: &Analysis, d: &DatasetDescriptor, events: u64) -> String {
    let columns: Vec<&str> = a.columns.iter().map(|c| c.name.as_str()).collect();
    format!(
        "{}|{}|{:?}|{}|{}|{}",
        d.label,
        d.kind.name(),
        d.cross_section_pb,
        events,
        a.selection,
        columns.join(",")
    )
}

/// Per-phase ratios `a / b` of median times. `0 / 0` counts as 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub read: f64,
    pub decode: f64,
    pub compute: f64,
    pub write: f64,
    pub read_decode: f64,
    pub read_compute: f64,
    pub total: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

pub fn compare_reports(a: &TimingReport, b: &TimingReport) -> Result<Comparison, BenchError> {
    if a.fingerprint != b.fingerprint {
        return Err(BenchError::IncomparableConfigs(format!(
            "`{}` vs `{}`",
            a.fingerprint, b.fingerprint
        )));
    }
    let (x, y) = (&a.median, &b.median);
    Ok(Comparison {
        read: ratio(x.read, y.read),
        decode: ratio(x.decode, y.decode),
        compute: ratio(x.compute, y.compute),
        write: ratio(x.write, y.write),
        read_decode: ratio(x.read + x.decode, y.read + y.decode),
        read_compute: ratio(x.read_compute(), y.read_compute()),
        total: ratio(x.total, y.total),
    })
}

/// Reports as compact JSON.
pub fn reports_json(reports: &[TimingReport]) -> String {
    serde_json::to_string(reports).expect("reports serialize")
}

/// One row per matrix cell per phase, median seconds.
pub fn reports_csv(reports: &[TimingReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "label",
        "cached",
        "compressed",
        "workers",
        "phase",
        "median_seconds",
        "storage_bytes",
        "cache_hits",
    ])
    .expect("in-memory write");
    for r in reports {
        let m = &r.median;
        let phases = [
            ("read", m.read),
            ("decode", m.decode),
            ("compute", m.compute),
            ("read_compute", m.read_compute()),
            ("write", m.write),
            ("total", m.total),
            ("first_pass", r.first_pass_median.total),
        ];
        for (phase, secs) in phases {
            w.write_record([
                r.label.clone(),
                r.cell.cached.to_string(),
                r.cell.compressed.to_string(),
                r.cell.workers.to_string(),
                phase.to_string(),
                format!("{secs:.6}"),
                m.storage_bytes.to_string(),
                m.cache_hits.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
