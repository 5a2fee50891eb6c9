use hepskim_core::{Histogram, HistogramError};
use serde::Serialize;

use super::{Analysis, AnalysisError, HistogramSet};
use crate::engine::DatasetKind;

/// Bin contents with per-bin uncertainty `sqrt(sumw2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub contents: Vec<f64>,
    pub uncertainty: Vec<f64>,
    pub sumw2: Vec<f64>,
    pub underflow: f64,
    pub overflow: f64,
}

impl Series {
    fn of(h: &Histogram) -> Self {
        Series {
            contents: h.contents.clone(),
            uncertainty: h.sumw2.iter().map(|s| s.sqrt()).collect(),
            sumw2: h.sumw2.clone(),
            underflow: h.underflow,
            overflow: h.overflow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub label: String,
    pub xsec_pb: f64,
    #[serde(flatten)]
    pub series: Series,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotHistogram {
    pub variable: String,
    pub nbins: u32,
    pub lo: f64,
    pub hi: f64,
    pub edges: Vec<f64>,
    /// Mc contributions in config order.
    pub components: Vec<Component>,
    pub stack: Series,
    /// Summed data datasets; `null` when the analysis has none.
    pub data: Option<Series>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotBundle {
    pub luminosity_invpb: f64,
    pub histograms: Vec<PlotHistogram>,
}

impl PlotBundle {
    /// Compact JSON with keys in declaration order.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }
}

/// Stacks mc components and sums data per histogram. `sets` must hold one
/// entry per analysis dataset.
pub fn build_plot_bundle(analysis: &Analysis, sets: &[HistogramSet]) -> Result<PlotBundle, AnalysisError> {
    let mut ordered = Vec::with_capacity(analysis.datasets.len());
    for d in &analysis.datasets {
        let set = sets
            .iter()
            .find(|s| s.label == d.label)
            .ok_or_else(|| AnalysisError::UnknownDataset(d.label.clone()))?;
        if set.histograms.len() != analysis.histograms.len() {
            return Err(HistogramError::SpecMismatch.into());
        }
        ordered.push((d, set));
    }
    let mut out = Vec::with_capacity(analysis.histograms.len());
    for (i, spec) in analysis.histograms.iter().enumerate() {
        let mut stack = Histogram::new(spec.clone())?;
        let mut data: Option<Histogram> = None;
        let mut components = Vec::new();
        for (d, set) in &ordered {
            let h = &set.histograms[i];
            if h.spec.variable != spec.variable {
                return Err(HistogramError::SpecMismatch.into());
            }
            match d.kind {
                DatasetKind::Mc => {
                    stack.merge(h)?;
                    components.push(Component {
                        label: d.label.clone(),
                        xsec_pb: d.cross_section_pb.unwrap_or(0.0),
                        series: Series::of(h),
                    });
                }
                DatasetKind::Data => match &mut data {
                    Some(acc) => acc.merge(h)?,
                    None => {
                        let mut acc = Histogram::new(spec.clone())?;
                        acc.merge(h)?;
                        data = Some(acc);
                    }
                },
            }
        }
        out.push(PlotHistogram {
            variable: spec.variable.clone(),
            nbins: spec.nbins,
            lo: spec.lo,
            hi: spec.hi,
            edges: (0..=spec.nbins).map(|b| spec.edge(b)).collect(),
            components,
            stack: Series::of(&stack),
            data: data.as_ref().map(Series::of),
        });
    }
    Ok(PlotBundle {
        luminosity_invpb: analysis.luminosity_invpb,
        histograms: out,
    })
}

/// One CSV row per bin per component, stack and data series.
pub fn plot_csv(bundle: &PlotBundle) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "histogram",
        "component",
        "kind",
        "bin",
        "lo",
        "hi",
        "content",
        "uncertainty",
    ])
    .expect("in-memory write");
    for h in &bundle.histograms {
        let mut series: Vec<(&str, &str, &Series)> = h
            .components
            .iter()
            .map(|c| (c.label.as_str(), "mc", &c.series))
            .collect();
        series.push(("stack", "stack", &h.stack));
        if let Some(d) = &h.data {
            series.push(("data", "data", d));
        }
        for (label, kind, s) in series {
            for b in 0..h.nbins as usize {
                w.write_record([
                    h.variable.clone(),
                    label.to_string(),
                    kind.to_string(),
                    b.to_string(),
                    h.edges[b].to_string(),
                    h.edges[b + 1].to_string(),
                    s.contents[b].to_string(),
                    s.uncertainty[b].to_string(),
                ])
                .expect("in-memory write");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

#[derive(Serialize)]
struct HistogramRecord<'a> {
    variable: &'a str,
    nbins: u32,
    lo: f64,
    hi: f64,
    contents: &'a [f64],
    sumw2: &'a [f64],
    underflow: f64,
    underflow_sumw2: f64,
    overflow: f64,
    overflow_sumw2: f64,
    entries: u64,
}

#[derive(Serialize)]
struct SetRecord<'a> {
    label: &'a str,
    kind: &'static str,
    histograms: Vec<HistogramRecord<'a>>,
}

/// Raw per-dataset histograms as compact JSON.
pub fn histograms_json(sets: &[HistogramSet]) -> String {
    let records: Vec<SetRecord> = sets
        .iter()
        .map(|s| SetRecord {
            label: &s.label,
            kind: s.kind.name(),
            histograms: s
                .histograms
                .iter()
                .map(|h| HistogramRecord {
                    variable: &h.spec.variable,
                    nbins: h.spec.nbins,
                    lo: h.spec.lo,
                    hi: h.spec.hi,
                    contents: &h.contents,
                    sumw2: &h.sumw2,
                    underflow: h.underflow,
                    underflow_sumw2: h.underflow_sumw2,
                    overflow: h.overflow,
                    overflow_sumw2: h.overflow_sumw2,
                    entries: h.entries,
                })
                .collect(),
        })
        .collect();
    serde_json::to_string(&records).expect("histograms serialize")
}
