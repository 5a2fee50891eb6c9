use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use hepskim_core::plan::{self, PartitionSpec, PlanError};
use hepskim_core::reduce::Combine;
use hepskim_core::{Column, NtupleRow, TypedExpr, TypedProjection, Value};

use super::{pool, DatasetDescriptor, EngineConfig, EngineError, PartitionMode};
use crate::storage::{scan_evt, write_ntu, EvtLayout, StorageError};

/// Non-fatal conditions recorded during traversal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// The cache outgrew its budget and was dropped; the dataset is Cold again.
    CacheMemoryExceeded { budget: u64, needed: u64 },
}

/// Per-traversal counters. Phase durations are summed over partitions, so
/// with several workers they can exceed `wall`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TraversalStats {
    pub partitions: usize,
    pub events: u64,
    pub storage_bytes: u64,
    pub decoded_bytes: u64,
    pub cache_hits: usize,
    pub read: Duration,
    pub decode: Duration,
    pub compute: Duration,
    pub wall: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteOutcome {
    pub rows: u64,
    pub bytes: u64,
    pub write: Duration,
    pub stats: TraversalStats,
}

#[derive(Default)]
struct Cache {
    persist: bool,
    entries: Vec<Option<Arc<Vec<Value>>>>,
    used: u64,
}

/// A glob-backed set of EVT files split into block-range partitions.
pub struct PartitionedDataset {
    descriptor: DatasetDescriptor,
    files: Vec<EvtLayout>,
    partitions: Vec<PartitionSpec>,
    workers: usize,
    budget: Option<u64>,
    cache: Mutex<Cache>,
    warnings: Mutex<Vec<Warning>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// Files matching `pattern`, sorted by path.
pub fn match_files(pattern: &str) -> Result<Vec<PathBuf>, EngineError> {
    let entries = glob::glob(pattern).map_err(|e| EngineError::BadGlob {
        glob: pattern.to_string(),
        reason: e.msg.to_string(),
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| EngineError::UnreadableFile {
            path: e.path().to_path_buf(),
            source: StorageError::Io(e.into()),
        })?;
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(EngineError::NoFilesMatched {
            glob: pattern.to_string(),
        });
    }
    Ok(files)
}

impl PartitionedDataset {
    /// Enumerates the descriptor's glob and plans partitions.
    pub fn open(descriptor: DatasetDescriptor, config: &EngineConfig) -> Result<Self, EngineError> {
        descriptor.validate()?;
        let files = match_files(&descriptor.glob)?;
        Self::from_files(descriptor, files, config)
    }

    /// Like [`PartitionedDataset::open`] with an explicit file list, used in the given order.
    pub fn from_files(
        descriptor: DatasetDescriptor,
        files: Vec<PathBuf>,
        config: &EngineConfig,
    ) -> Result<Self, EngineError> {
        if config.workers == 0 {
            return Err(EngineError::NoWorkers);
        }
        let mut layouts: Vec<EvtLayout> = Vec::with_capacity(files.len());
        for path in files {
            let layout = scan_evt(&path).map_err(|source| EngineError::UnreadableFile {
                path: path.clone(),
                source,
            })?;
            if let Some(first) = layouts.first() {
                if first.schema != layout.schema {
                    return Err(EngineError::SchemaMismatch {
                        path,
                        first: first.path.clone(),
                    });
                }
            }
            layouts.push(layout);
        }
        let partitions = plan_for(&layouts, &config.partition)?;
        Ok(PartitionedDataset {
            descriptor,
            cache: Mutex::new(Cache {
                entries: vec![None; partitions.len()],
                ..Cache::default()
            }),
            files: layouts,
            partitions,
            workers: config.workers,
            budget: config.cache_budget_bytes,
            warnings: Mutex::new(Vec::new()),
        })
    }

    pub fn descriptor(&self) -> &DatasetDescriptor {
        &self.descriptor
    }

    pub fn files(&self) -> &[EvtLayout] {
        &self.files
    }

    pub fn partitions(&self) -> &[PartitionSpec] {
        &self.partitions
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn set_workers(&mut self, workers: usize) -> Result<(), EngineError> {
        if workers == 0 {
            return Err(EngineError::NoWorkers);
        }
        self.workers = workers;
        Ok(())
    }

    /// Schema shared by every file; `None` for a dataset without files.
    pub fn schema(&self) -> Option<&hepskim_core::Schema> {
        self.files.first().map(|f| &f.schema)
    }

    pub fn total_events(&self) -> u64 {
        self.files.iter().map(EvtLayout::events).sum()
    }

    pub fn total_bytes(&self) -> u64 {
        self.files.iter().map(|f| f.file_bytes).sum()
    }

    /// Requests caching: the next traversal keeps each partition's decoded events.
    pub fn persist(&self) -> &Self {
        lock(&self.cache).persist = true;
        self
    }

    /// Drops cached events and returns to Cold.
    pub fn unpersist(&self) {
        let mut c = lock(&self.cache);
        c.persist = false;
        c.entries.iter_mut().for_each(|e| *e = None);
        c.used = 0;
    }

    /// True once every partition is held in memory.
    pub fn is_cached(&self) -> bool {
        let c = lock(&self.cache);
        c.persist && c.entries.iter().all(Option::is_some)
    }

    pub fn cached_bytes(&self) -> u64 {
        lock(&self.cache).used
    }

    pub fn warnings(&self) -> Vec<Warning> {
        lock(&self.warnings).clone()
    }

    fn cached(&self, i: usize) -> Option<Arc<Vec<Value>>> {
        lock(&self.cache).entries[i].clone()
    }

    fn offer(&self, i: usize, events: &Arc<Vec<Value>>) {
        let mut c = lock(&self.cache);
        if !c.persist || c.entries[i].is_some() {
            return;
        }
        let size: u64 = events.iter().map(|e| e.footprint() as u64).sum();
        let needed = c.used + size;
        match self.budget {
            Some(budget) if needed > budget => {
                c.persist = false;
                c.entries.iter_mut().for_each(|e| *e = None);
                c.used = 0;
                lock(&self.warnings).push(Warning::CacheMemoryExceeded { budget, needed });
            }
            _ => {
                c.entries[i] = Some(Arc::clone(events));
                c.used = needed;
            }
        }
    }

    fn load(&self, i: usize, stats: &mut TraversalStats) -> Result<Arc<Vec<Value>>, StorageError> {
        if let Some(events) = self.cached(i) {
            stats.cache_hits += 1;
            return Ok(events);
        }
        let part = &self.partitions[i];
        let layout = &self.files[part.file];
        let t = Instant::now();
        let mut file = File::open(&layout.path)?;
        let bytes = layout.read_range(&mut file, part.blocks.clone())?;
        stats.read += t.elapsed();
        stats.storage_bytes += bytes.len() as u64;
        let t = Instant::now();
        let (events, decoded) = layout.decode_range(part.blocks.clone(), &bytes)?;
        drop(bytes);
        stats.decode += t.elapsed();
        stats.decoded_bytes += decoded;
        let events = Arc::new(events);
        self.offer(i, &events);
        Ok(events)
    }

    /// Applies `f` to each partition's events on the worker pool. Results come
    /// back in partition order regardless of scheduling.
    pub fn traverse<T, F>(&self, f: F) -> Result<(Vec<T>, TraversalStats), EngineError>
    where
        T: Send,
        F: Fn(usize, &[Value]) -> T + Sync,
    {
        let start = Instant::now();
        let failed = AtomicBool::new(false);
        let results = pool::run_indexed(self.partitions.len(), self.workers, |i| {
            if failed.load(Ordering::Relaxed) {
                return None;
            }
            let mut stats = TraversalStats::default();
            let out = self.load(i, &mut stats).map(|events| {
                let t = Instant::now();
                let out = f(i, &events);
                stats.compute += t.elapsed();
                stats.events += events.len() as u64;
                out
            });
            if out.is_err() {
                failed.store(true, Ordering::Relaxed);
            }
            Some((out, stats))
        });
        let mut total = TraversalStats {
            partitions: self.partitions.len(),
            ..TraversalStats::default()
        };
        let mut outs = Vec::with_capacity(results.len());
        let mut first_err = None;
        for (i, r) in results.into_iter().enumerate() {
            let Some((out, s)) = r else { continue };
            total.events += s.events;
            total.storage_bytes += s.storage_bytes;
            total.decoded_bytes += s.decoded_bytes;
            total.cache_hits += s.cache_hits;
            total.read += s.read;
            total.decode += s.decode;
            total.compute += s.compute;
            match out {
                Ok(v) => outs.push(v),
                Err(source) if first_err.is_none() => {
                    first_err = Some(EngineError::Partition {
                        partition: i,
                        file: self.files[self.partitions[i].file].path.clone(),
                        source,
                    })
                }
                Err(_) => {}
            }
        }
        if let Some(e) = first_err {
            return Err(e);
        }
        total.wall = start.elapsed();
        Ok((outs, total))
    }

    /// Maps every event to an f64 and reduces: per-partition partials (Kahan
    /// for sums) merged pairwise in partition order.
    pub fn map_reduce<M>(&self, map: M, combine: Combine) -> Result<(f64, TraversalStats), EngineError>
    where
        M: Fn(&Value) -> f64 + Sync,
    {
        let (partials, stats) = self.traverse(|_, events| combine.fold(events.iter().map(&map)))?;
        Ok((combine.finish(partials), stats))
    }

    /// Skim and slim: keeps events passing `cut`, projects them, applies
    /// `finalize` to each row and writes the rows, in partition then event
    /// order, to an NTU file at `sink`. A failed write leaves no file behind.
    pub fn filter_map_write<F>(
        &self,
        cut: &TypedExpr,
        proj: &TypedProjection,
        finalize: F,
        columns: &[Column],
        sink: &Path,
        group_rows: u32,
    ) -> Result<WriteOutcome, EngineError>
    where
        F: Fn(NtupleRow) -> NtupleRow + Sync,
    {
        let (parts, stats) = self.traverse(|_, events| {
            events
                .iter()
                .filter(|e| cut.eval_bool(e))
                .map(|e| finalize(proj.eval(e)))
                .collect::<Vec<_>>()
        })?;
        let t = Instant::now();
        let rows = parts.iter().flatten().map(Vec::as_slice);
        let bytes = write_ntu(sink, columns, rows, group_rows).map_err(|source| EngineError::Sink {
            path: sink.to_path_buf(),
            source,
        })?;
        Ok(WriteOutcome {
            rows: parts.iter().map(|p| p.len() as u64).sum(),
            bytes,
            write: t.elapsed(),
            stats,
        })
    }
}

fn plan_for(files: &[EvtLayout], mode: &PartitionMode) -> Result<Vec<PartitionSpec>, PlanError> {
    let counts: Vec<usize> = files.iter().map(|f| f.blocks.len()).collect();
    match mode {
        PartitionMode::Auto { target_bytes } => {
            let sizes: Vec<Vec<u64>> = files
                .iter()
                .map(|f| f.blocks.iter().map(|b| b.stored_bytes()).collect())
                .collect();
            plan::plan_auto(&sizes, *target_bytes)
        }
        PartitionMode::PerFile(n) => plan::plan_per_file(&counts, *n),
        PartitionMode::Explicit(ranges) => {
            let specs = ranges
                .iter()
                .map(|r| {
                    let file = files
                        .iter()
                        .position(|f| {
                            f.path.as_os_str() == r.file.as_str()
                                || f.path.file_name().is_some_and(|n| n == r.file.as_str())
                        })
                        .ok_or_else(|| {
                            PlanError::InvalidCustomPlan(format!("`{}` is not part of the dataset", r.file))
                        })?;
                    Ok(PartitionSpec::new(file, r.start..r.end))
                })
                .collect::<Result<Vec<_>, PlanError>>()?;
            plan::validate_custom(&counts, specs)
        }
    }
}
