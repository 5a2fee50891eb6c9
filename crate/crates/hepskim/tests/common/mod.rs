//! Serial reference implementations shared by the integration tests.
//!
//! Nothing here goes through the engine, the expression evaluator or the
//! histogram type: events are read block by block with the plain reader and
//! every quantity is computed in host code.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use hepskim::bench::{generate_corpus, GeneratorSpec, WeightDist};
use hepskim::core::{Event, HistogramSpec, Scalar};
use hepskim::engine::DatasetKind;
use hepskim::storage::{read_evt, WriteOptions};

/// Every event of `paths`, in file then event order.
pub fn read_events(paths: &[PathBuf]) -> Vec<Event> {
    let mut out = Vec::new();
    for p in paths {
        let mut r = read_evt(p).unwrap();
        while let Some(block) = r.next_block().unwrap() {
            out.extend(block.iter().map(|v| Event::from_value(v).expect("conforming event")));
        }
    }
    out
}

pub fn kahan(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub fn passes_default(e: &Event) -> bool {
    e.met.pt > 200.0 && e.muons.is_empty() && e.electrons.is_empty() && e.jets.iter().any(|j| j.pt > 30.0)
}

/// The default projection followed by a weight column.
pub fn default_row(e: &Event, weight: f64) -> Vec<Scalar> {
    let njets = e.jets.iter().filter(|j| j.pt > 30.0).count() as i64;
    let ht = e.jets.iter().fold(0.0, |a, j| a + j.pt);
    let lead = e.jets.iter().map(|j| j.pt).reduce(f64::max).unwrap_or(0.0);
    vec![
        Scalar::F64(e.met.pt),
        Scalar::F64(e.met.phi),
        Scalar::I64(njets),
        Scalar::F64(ht),
        Scalar::F64(lead),
        Scalar::I64(e.taus.len() as i64),
        Scalar::F64(weight),
    ]
}

pub fn default_columns() -> Vec<&'static str> {
    vec!["met_pt", "met_phi", "njets", "ht", "lead_jet_pt", "ntaus", "weight"]
}

/// Serial skim of the default analysis. Weights are `w * xsec * lumi / sumw`
/// for mc (`xsec` given) and 1.0 for data.
pub fn skim_default(events: &[Event], xsec: Option<f64>, lumi: f64) -> Vec<Vec<Scalar>> {
    let sumw = kahan(events.iter().map(|e| e.weight));
    events
        .iter()
        .filter(|e| passes_default(e))
        .map(|e| {
            let w = match xsec {
                Some(x) => e.weight * x * lumi / sumw,
                None => 1.0,
            };
            default_row(e, w)
        })
        .collect()
}

/// Brute-force binning: bins, sumw2, underflow, overflow.
#[derive(Debug, Clone, PartialEq)]
pub struct RefHist {
    pub contents: Vec<f64>,
    pub sumw2: Vec<f64>,
    pub underflow: f64,
    pub overflow: f64,
}

pub fn ref_hist(spec: &HistogramSpec, values: &[f64], weights: &[f64]) -> RefHist {
    let n = spec.nbins as usize;
    let edges: Vec<f64> = (0..=n)
        .map(|i| spec.lo + (spec.hi - spec.lo) * i as f64 / n as f64)
        .collect();
    let mut h = RefHist {
        contents: vec![0.0; n],
        sumw2: vec![0.0; n],
        underflow: 0.0,
        overflow: 0.0,
    };
    for (&v, &w) in values.iter().zip(weights) {
        if v < spec.lo {
            h.underflow += w;
        } else if v >= spec.hi || v.is_nan() {
            h.overflow += w;
        } else {
            let i = (0..n).rev().find(|&i| v >= edges[i]).unwrap_or(0);
            h.contents[i] += w;
            h.sumw2[i] += w * w;
        }
    }
    h
}

pub fn scalar_close(a: &Scalar, b: &Scalar, tol: f64) -> bool {
    match (a, b) {
        (Scalar::F64(x), Scalar::F64(y)) => rel_close(*x, *y, tol),
        _ => a == b,
    }
}

pub fn mc_spec(seed: u64, n: u64) -> GeneratorSpec {
    GeneratorSpec::new(seed, n, DatasetKind::Mc)
}

pub fn plain() -> WriteOptions {
    WriteOptions {
        compress: false,
        block_events: 1024,
    }
}

/// The signal, background and data corpora used by the analysis tests,
/// scaled by `n` signal events.
pub struct Corpus {
    pub dir: PathBuf,
    pub signal: Vec<PathBuf>,
    pub ttbar: Vec<PathBuf>,
    pub data: Vec<PathBuf>,
}

pub fn build_corpus(dir: &Path, n: u64, files: usize, opts: WriteOptions) -> Corpus {
    fs::create_dir_all(dir).unwrap();
    let signal = generate_corpus(&mc_spec(42, n), dir, "signal", files, opts).unwrap();
    let ttbar = GeneratorSpec {
        met_scale: 60.0,
        weights: WeightDist::Signed { p_plus: 0.8 },
        ..mc_spec(7, (n * 3 / 10).max(1))
    };
    let ttbar = generate_corpus(&ttbar, dir, "ttbar", files.clamp(1, 3), opts).unwrap();
    let data = GeneratorSpec::new(43, (n / 5).max(1), DatasetKind::Data);
    let data = generate_corpus(&data, dir, "data", files.clamp(1, 2), opts).unwrap();
    Corpus {
        dir: dir.to_path_buf(),
        signal,
        ttbar,
        data,
    }
}

/// A config over a corpus directory, with the default selection and
/// projection left implicit. `extra` is spliced into the top-level object.
pub fn config_json(dir: &Path, extra: &str) -> String {
    let d = dir.display();
    format!(
        r#"{{
  "datasets": [
    {{"glob": "{d}/signal_*.evt", "kind": "mc", "xsec_pb": 0.5, "label": "signal"}},
    {{"glob": "{d}/ttbar_*.evt", "kind": "mc", "xsec_pb": 830.0, "label": "ttbar"}},
    {{"glob": "{d}/data_*.evt", "kind": "data", "label": "data"}}
  ],
  "luminosity_invpb": 36000.0,
  "histograms": [
    {{"variable": "met_pt", "nbins": 40, "lo": 200.0, "hi": 1000.0}},
    {{"variable": "njets", "nbins": 10, "lo": 0.0, "hi": 10.0}},
    {{"variable": "ht", "nbins": 50, "lo": 0.0, "hi": 2000.0}},
    {{"variable": "weight", "nbins": 20, "lo": -1.0, "hi": 1.0}}
  ]{extra}
}}"#
    )
}

pub mod arb {
    use hepskim::core::{Column, PrimitiveKind, Scalar, Schema, SchemaNode, Value};
    use proptest::prelude::*;

    pub fn kind() -> impl Strategy<Value = PrimitiveKind> {
        prop_oneof![
            Just(PrimitiveKind::F64),
            Just(PrimitiveKind::F32),
            Just(PrimitiveKind::I64),
            Just(PrimitiveKind::I32),
            Just(PrimitiveKind::Bool),
        ]
    }

    fn record(children: Vec<SchemaNode>) -> SchemaNode {
        SchemaNode::record(children.into_iter().enumerate().map(|(i, n)| (format!("f{i}"), n)))
    }

    fn node() -> impl Strategy<Value = SchemaNode> {
        kind()
            .prop_map(SchemaNode::Primitive)
            .prop_recursive(4, 24, 4, |inner| {
                prop_oneof![
                    inner.clone().prop_map(SchemaNode::array),
                    prop::collection::vec(inner, 1..4).prop_map(record),
                ]
            })
    }

    pub fn schema() -> impl Strategy<Value = Schema> {
        prop::collection::vec(node(), 1..5).prop_map(|f| Schema::new(record(f)).expect("bounded depth"))
    }

    pub fn scalar(kind: PrimitiveKind) -> BoxedStrategy<Scalar> {
        match kind {
            PrimitiveKind::F64 => any::<f64>().prop_map(Scalar::F64).boxed(),
            PrimitiveKind::F32 => any::<f32>().prop_map(Scalar::F32).boxed(),
            PrimitiveKind::I64 => any::<i64>().prop_map(Scalar::I64).boxed(),
            PrimitiveKind::I32 => any::<i32>().prop_map(Scalar::I32).boxed(),
            PrimitiveKind::Bool => any::<bool>().prop_map(Scalar::Bool).boxed(),
        }
    }

    pub fn value(node: &SchemaNode) -> BoxedStrategy<Value> {
        match node {
            SchemaNode::Primitive(k) => scalar(*k).prop_map(Value::from).boxed(),
            SchemaNode::Array(e) => prop::collection::vec(value(e), 0..4).prop_map(Value::Array).boxed(),
            SchemaNode::Record(fields) => fields
                .iter()
                .map(|f| value(&f.node))
                .collect::<Vec<_>>()
                .prop_map(Value::Record)
                .boxed(),
        }
    }

    /// A schema with up to `max_events` conforming events.
    pub fn events(max_events: usize) -> impl Strategy<Value = (Schema, Vec<Value>)> {
        schema().prop_flat_map(move |s| {
            let v = prop::collection::vec(value(s.root()), 0..max_events);
            (Just(s), v)
        })
    }

    /// Columns, rows matching them, and a row-group size.
    pub fn table(max_rows: usize) -> impl Strategy<Value = (Vec<Column>, Vec<Vec<Scalar>>, u32)> {
        prop::collection::vec(kind(), 1..7).prop_flat_map(move |kinds| {
            let cols: Vec<Column> = kinds
                .iter()
                .enumerate()
                .map(|(i, &k)| Column::new(format!("c{i}"), k))
                .collect();
            let row: Vec<BoxedStrategy<Scalar>> = kinds.iter().map(|&k| scalar(k)).collect();
            (Just(cols), prop::collection::vec(row, 0..max_rows), 1..9u32)
        })
    }
}
