//! The `hepskim` command line.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error, 3 I/O error.
//! Every failure prints a single diagnostic line on stderr.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    build_plot_bundle, fill_histograms, histograms_json, open_dataset, plot_csv, run_skim, sum_of_weights, Analysis,
    AnalysisError, HistogramSet, SkimResult,
};
use crate::bench::{
    compare_reports, generate, generate_corpus, reports_csv, reports_json, run_benchmark, BenchError, BenchInputs,
    GeneratorSpec, MatrixCell, WeightDist,
};
use crate::engine::{DatasetKind, EngineError, Warning};
use crate::storage::{
    read_evt, read_ntu, scan_evt, scan_ntu, schema_to_json, StorageError, WriteOptions, DEFAULT_BLOCK_EVENTS,
};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hepskim", version, about = "Partitioned skim/slim analysis of event files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic event file or corpus.
    Gen(GenArgs),
    /// Rewrite an event file with or without compression.
    Convert(ConvertArgs),
    /// Summarize an event file or ntuple after fully decoding it.
    Inspect { file: PathBuf },
    /// Print the sum of generator weights of mc datasets.
    SumWeights(RunArgs),
    /// Skim and slim every dataset to `<out-dir>/<label>.ntu`.
    Skim(RunArgs),
    /// Skim, then fill histograms into `<out-dir>/histograms.json`.
    Hist(RunArgs),
    /// Skim, fill and stack into `<out-dir>/plot.json` and `plot.csv`.
    PlotData(RunArgs),
    /// Time the skim over cached/compressed/worker matrix cells.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Data,
    Mc,
}

impl From<KindArg> for DatasetKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Data => DatasetKind::Data,
            KindArg::Mc => DatasetKind::Mc,
        }
    }
}

fn parse_weights(s: &str) -> Result<WeightDist, String> {
    let (kind, value) = s
        .split_once(':')
        .ok_or_else(|| format!("expected `const:W` or `signed:P`, got `{s}`"))?;
    let v: f64 = value.parse().map_err(|e| format!("`{value}`: {e}"))?;
    match kind {
        "const" => Ok(WeightDist::Constant(v)),
        "signed" => Ok(WeightDist::Signed { p_plus: v }),
        _ => Err(format!("unknown weight distribution `{kind}`")),
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    events: u64,
    #[arg(long, value_enum, default_value = "mc")]
    kind: KindArg,
    /// Output file; with `--files` above 1, the output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    files: u32,
    /// File name prefix for multi-file corpora.
    #[arg(long, default_value = "events")]
    prefix: String,
    #[arg(long)]
    compress: bool,
    #[arg(long, default_value_t = DEFAULT_BLOCK_EVENTS, value_parser = clap::value_parser!(u32).range(1..))]
    block_events: u32,
    #[arg(long, default_value_t = 100.0)]
    met_scale: f64,
    #[arg(long, default_value_t = 3.0)]
    mean_jets: f64,
    /// `const:W` or `signed:P`.
    #[arg(long, default_value = "const:1.0", value_parser = parse_weights)]
    weights: WeightDist,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    input: PathBuf,
    output: PathBuf,
    /// Deflate block payloads. Without either flag the input's setting is toggled.
    #[arg(long, conflicts_with = "no_compress")]
    compress: bool,
    #[arg(long)]
    no_compress: bool,
    #[arg(long, default_value_t = DEFAULT_BLOCK_EVENTS, value_parser = clap::value_parser!(u32).range(1..))]
    block_events: u32,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's worker count.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Restrict to one dataset label.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Dataset to time; the first mc dataset by default.
    #[arg(long)]
    dataset: Option<String>,
    /// Comma-separated worker counts; the config's count by default.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    workers: Vec<u64>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
}

/// A failure mapped to its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Display) -> Failure {
    Failure {
        code,
        message: message.to_string().replace('\n', " "),
    }
}

fn storage_code(e: &StorageError) -> i32 {
    if e.is_io() {
        EXIT_IO
    } else {
        EXIT_DATA
    }
}

fn engine_code(e: &EngineError) -> i32 {
    match e {
        EngineError::InvalidDescriptor(_)
        | EngineError::BadGlob { .. }
        | EngineError::Plan(_)
        | EngineError::NoWorkers => EXIT_USAGE,
        EngineError::NoFilesMatched { .. } | EngineError::SchemaMismatch { .. } => EXIT_DATA,
        _ => e.storage().map_or(EXIT_DATA, storage_code),
    }
}

fn analysis_code(e: &AnalysisError) -> i32 {
    match e {
        AnalysisError::Config(_) | AnalysisError::KindMismatch { .. } | AnalysisError::UnknownDataset(_) => EXIT_USAGE,
        AnalysisError::SchemaMismatch { .. } | AnalysisError::ZeroSumOfWeights { .. } | AnalysisError::Histogram(_) => {
            EXIT_DATA
        }
        AnalysisError::Engine { source, .. } => engine_code(source),
        AnalysisError::Storage { source, .. } => storage_code(source),
        AnalysisError::Io { .. } => EXIT_IO,
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        fail(analysis_code(&e), e)
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        let code = match &e {
            BenchError::InvalidSpec(_) | BenchError::InvalidRepetitions(_) => EXIT_USAGE,
            BenchError::IncomparableConfigs(_) | BenchError::NonDeterministic { .. } => EXIT_DATA,
            BenchError::Analysis(a) => analysis_code(a),
            BenchError::Engine { source, .. } => engine_code(source),
            BenchError::Storage { source, .. } => storage_code(source),
            BenchError::Io { .. } => EXIT_IO,
        };
        fail(code, e)
    }
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    fail(EXIT_IO, format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let first = e.to_string();
                    let line = first
                        .lines()
                        .next()
                        .unwrap_or("usage error")
                        .trim_start_matches("error: ");
                    let _ = writeln!(err, "hepskim: {line}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "hepskim: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Convert(a) => cmd_convert(a, out),
        Command::Inspect { file } => cmd_inspect(&file, out),
        Command::SumWeights(a) => cmd_sum_weights(a, out),
        Command::Skim(a) => cmd_skim(a, out, err).map(drop),
        Command::Hist(a) => cmd_hist(a, out, err).map(drop),
        Command::PlotData(a) => cmd_plot(a, out, err),
        Command::Bench(a) => cmd_bench(a, out),
    }
}

fn say(out: &mut dyn Write, line: impl Display) -> Result<(), Failure> {
    writeln!(out, "{line}").map_err(|e| fail(EXIT_IO, format!("stdout: {e}")))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_fail(path, e))
}

fn cmd_gen(a: GenArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let spec = GeneratorSpec {
        met_scale: a.met_scale,
        mean_jets: a.mean_jets,
        weights: a.weights,
        ..GeneratorSpec::new(a.seed, a.events, a.kind.into())
    };
    spec.validate()?;
    let opts = WriteOptions {
        compress: a.compress,
        block_events: a.block_events,
    };
    if a.files == 1 {
        let s = generate(&spec, &a.out, opts)?;
        say(
            out,
            format!(
                "{}: {} events, {} blocks, {} bytes",
                a.out.display(),
                s.events,
                s.blocks,
                s.bytes
            ),
        )
    } else {
        fs::create_dir_all(&a.out).map_err(|e| io_fail(&a.out, e))?;
        let files = generate_corpus(&spec, &a.out, &a.prefix, a.files as usize, opts)?;
        say(
            out,
            format!("{}: {} events in {} files", a.out.display(), a.events, files.len()),
        )
    }
}

fn cmd_convert(a: ConvertArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let data = |e: StorageError| fail(storage_code(&e), format!("{}: {e}", a.input.display()));
    let compress = match (a.compress, a.no_compress) {
        (true, _) => true,
        (_, true) => false,
        _ => !scan_evt(&a.input).map_err(data)?.compressed,
    };
    let opts = WriteOptions {
        compress,
        block_events: a.block_events,
    };
    let s = crate::storage::convert_evt(&a.input, &a.output, opts).map_err(data)?;
    say(
        out,
        format!(
            "{}: {} events, {} blocks, {} bytes, compression {}",
            a.output.display(),
            s.events,
            s.blocks,
            s.bytes,
            if compress { "deflate" } else { "none" }
        ),
    )
}

fn cmd_inspect(path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let mut magic = [0u8; 4];
    let got = File::open(path)
        .and_then(|f| BufReader::new(f).take(4).read(&mut magic))
        .map_err(|e| io_fail(path, e))?;
    let data = |e: StorageError| fail(storage_code(&e), format!("{}: {e}", path.display()));
    if got == 4 && &magic == b"NTU1" {
        let layout = scan_ntu(path).map_err(data)?;
        let cols = read_ntu(path, None).map_err(data)?;
        let names: Vec<String> = layout
            .columns
            .iter()
            .map(|c| format!("{}:{}", c.name, c.kind))
            .collect();
        say(out, format!("format: NTU, {} bytes", layout.file_bytes))?;
        say(out, format!("columns: {}", names.join(", ")))?;
        return say(out, format!("{} rows, {} groups", cols.rows, cols.group_rows.len()));
    }
    let layout = scan_evt(path).map_err(data)?;
    let mut reader = read_evt(path).map_err(data)?;
    let mut events = 0u64;
    while let Some(block) = reader.next_block().map_err(data)? {
        events += block.len() as u64;
    }
    say(out, format!("format: EVT, {} bytes", layout.file_bytes))?;
    say(out, format!("schema: {}", schema_to_json(&layout.schema)))?;
    say(
        out,
        format!("compression: {}", if layout.compressed { "deflate" } else { "none" }),
    )?;
    say(out, format!("{events} events, {} blocks", layout.blocks.len()))
}

fn load(a: &RunArgs) -> Result<Analysis, Failure> {
    let mut analysis = Analysis::load(&a.config)?;
    if let Some(w) = a.workers {
        analysis.engine.workers = w as usize;
    }
    if let Some(label) = &a.dataset {
        let d = analysis.dataset(label)?.clone();
        analysis.datasets = vec![d];
    }
    Ok(analysis)
}

fn make_out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))
}

fn cmd_sum_weights(a: RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let analysis = load(&a)?;
    let targets: Vec<_> = if a.dataset.is_some() {
        analysis.datasets.clone()
    } else {
        analysis
            .datasets
            .iter()
            .filter(|d| d.kind == DatasetKind::Mc)
            .cloned()
            .collect()
    };
    let Some(first) = analysis.datasets.first() else {
        return Ok(());
    };
    if targets.is_empty() {
        return Err(AnalysisError::KindMismatch {
            label: first.label.clone(),
            kind: first.kind.name(),
        }
        .into());
    }
    if let Some(d) = targets.iter().find(|d| d.kind != DatasetKind::Mc) {
        return Err(AnalysisError::KindMismatch {
            label: d.label.clone(),
            kind: d.kind.name(),
        }
        .into());
    }
    let mut results = Vec::new();
    for d in &targets {
        let ds = open_dataset(&analysis, d)?;
        let (sumw, stats) = sum_of_weights(&ds)?;
        say(out, format!("{}: {sumw:?} ({} events)", d.label, stats.events))?;
        results.push(serde_json::json!({"label": d.label, "events": stats.events, "sum_of_weights": sumw}));
    }
    make_out_dir(&a.out_dir)?;
    write_file(
        &a.out_dir.join("sum_weights.json"),
        &serde_json::to_string(&results).expect("json"),
    )
}

fn warn(err: &mut dyn Write, label: &str, warnings: &[Warning]) {
    for w in warnings {
        let Warning::CacheMemoryExceeded { budget, needed } = w;
        let _ = writeln!(
            err,
            "hepskim: warning: dataset `{label}`: cache needs {needed} bytes, budget is {budget}; continuing uncached"
        );
    }
}

fn cmd_skim(a: RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(Analysis, Vec<SkimResult>), Failure> {
    let analysis = load(&a)?;
    make_out_dir(&a.out_dir)?;
    let mut results = Vec::new();
    for d in &analysis.datasets {
        let ds = open_dataset(&analysis, d)?;
        let r = run_skim(&analysis, &ds, &a.out_dir.join(format!("{}.ntu", d.label)))?;
        warn(err, &d.label, &r.warnings);
        say(
            out,
            format!(
                "{}: {} → {} rows (reduction {:.6})",
                r.label,
                r.input_events,
                r.rows,
                r.reduction()
            ),
        )?;
        results.push(r);
    }
    Ok((analysis, results))
}

fn cmd_hist(a: RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(Analysis, Vec<HistogramSet>), Failure> {
    let out_dir = a.out_dir.clone();
    let (analysis, skims) = cmd_skim(a, out, err)?;
    let mut sets = Vec::with_capacity(skims.len());
    for (d, s) in analysis.datasets.iter().zip(&skims) {
        sets.push(fill_histograms(&analysis, d, &s.output, analysis.engine.workers)?);
    }
    let path = out_dir.join("histograms.json");
    write_file(&path, &histograms_json(&sets))?;
    say(out, format!("wrote {}", path.display()))?;
    Ok((analysis, sets))
}

fn cmd_plot(a: RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let out_dir = a.out_dir.clone();
    let (analysis, sets) = cmd_hist(a, out, err)?;
    let bundle = build_plot_bundle(&analysis, &sets)?;
    let json = out_dir.join("plot.json");
    let csv = out_dir.join("plot.csv");
    write_file(&json, &bundle.to_json())?;
    write_file(&csv, &plot_csv(&bundle))?;
    say(out, format!("wrote {} and {}", json.display(), csv.display()))
}

fn cmd_bench(a: BenchArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let analysis = Analysis::load(&a.config)?;
    if a.reps < 3 {
        return Err(BenchError::InvalidRepetitions(a.reps).into());
    }
    let label = match &a.dataset {
        Some(l) => analysis.dataset(l)?.label.clone(),
        None => analysis
            .datasets
            .iter()
            .find(|d| d.kind == DatasetKind::Mc)
            .unwrap_or(&analysis.datasets[0])
            .label
            .clone(),
    };
    let workers: Vec<usize> = if a.workers.is_empty() {
        vec![analysis.engine.workers]
    } else {
        a.workers.iter().map(|&w| w as usize).collect()
    };
    make_out_dir(&a.out_dir)?;
    let inputs = BenchInputs::prepare(&analysis, &label, &a.out_dir.join("inputs"))?;
    let mut reports = Vec::new();
    for &w in &workers {
        for compressed in [false, true] {
            for cached in [false, true] {
                let cell = MatrixCell {
                    cached,
                    compressed,
                    workers: w,
                };
                let r = run_benchmark(&analysis, &inputs, cell, a.reps, &a.out_dir)?;
                let m = &r.median;
                say(
                    out,
                    format!(
                        "{}: read {:.4}s decode {:.4}s compute {:.4}s write {:.4}s total {:.4}s, {} bytes read",
                        cell.tag(),
                        m.read,
                        m.decode,
                        m.compute,
                        m.write,
                        m.total,
                        m.storage_bytes
                    ),
                )?;
                reports.push(r);
            }
        }
    }
    for pair in reports.chunks(2) {
        if let [uncached, cached] = pair {
            let c = compare_reports(cached, uncached)?;
            say(
                out,
                format!(
                    "{} vs uncached: read+compute ratio {:.3}, write ratio {:.3}, total ratio {:.3}",
                    cached.cell.tag(),
                    c.read_compute,
                    c.write,
                    c.total
                ),
            )?;
        }
    }
    write_file(&a.out_dir.join("bench.json"), &reports_json(&reports))?;
    write_file(&a.out_dir.join("bench.csv"), &reports_csv(&reports))?;
    say(out, format!("wrote {}", a.out_dir.join("bench.json").display()))
}
