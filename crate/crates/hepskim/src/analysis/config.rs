use std::fs;
use std::path::{Path, PathBuf};

use hepskim_core::expr::{parse_expr, parse_projection, typecheck_cut, typecheck_projection};
use hepskim_core::schema::{flatten_schema, FlattenRules};
use hepskim_core::{analysis_schema, Column, HistogramSpec, PrimitiveKind, TypedExpr, TypedProjection};
use serde::{Deserialize, Serialize};

use super::{AnalysisError, DEFAULT_PROJECTION, DEFAULT_SELECTION, WEIGHT_COLUMN};
use crate::engine::{
    default_workers, DatasetDescriptor, DatasetKind, EngineConfig, ExplicitRange, PartitionMode, DEFAULT_TARGET_BYTES,
};
use crate::storage::DEFAULT_GROUP_ROWS;

/// The analysis config file, as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub datasets: Vec<DatasetEntry>,
    pub luminosity_invpb: f64,
    /// Cut expression; the shipped default selection when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<String>,
    /// Output columns; the shipped default projection when absent, every
    /// flattened scalar field when empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Vec<ColumnEntry>>,
    #[serde(default)]
    pub histograms: Vec<HistogramEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_budget_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionEntry>,
    /// Keep mc events in memory between the two passes.
    #[serde(default = "yes")]
    pub persist: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_rows: Option<u32>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub glob: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xsec_pb: Option<f64>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnEntry {
    pub name: String,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramEntry {
    pub variable: String,
    pub nbins: u32,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionEntry {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomPlan>,
}

/// `{"per_file": N}` or a list of explicit block ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CustomPlan {
    PerFile { per_file: usize },
    Ranges(Vec<RangeEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeEntry {
    pub file: String,
    pub start: usize,
    pub end: usize,
}

/// A validated, type-checked analysis.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub datasets: Vec<DatasetDescriptor>,
    pub luminosity_invpb: f64,
    pub selection: String,
    pub cut: TypedExpr,
    /// Projection without the trailing weight column.
    pub projection: TypedProjection,
    /// Output columns: the projection plus `weight`.
    pub columns: Vec<Column>,
    pub histograms: Vec<HistogramSpec>,
    pub engine: EngineConfig,
    pub persist: bool,
    pub group_rows: u32,
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, AnalysisError> {
    Err(AnalysisError::Config(msg.into()))
}

fn filename_safe(label: &str) -> bool {
    !label.is_empty()
        && !label.starts_with('.')
        && label.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
}

impl AnalysisConfig {
    /// Parses config text. Syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, AnalysisError> {
        serde_json::from_str(text).map_err(|e| AnalysisError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field and type-checks expressions. Relative dataset globs
    /// are resolved against `base`. Performs no I/O.
    pub fn validate(&self, base: Option<&Path>) -> Result<Analysis, AnalysisError> {
        if !(self.luminosity_invpb.is_finite() && self.luminosity_invpb > 0.0) {
            return config_err(format!(
                "luminosity_invpb must be finite and > 0, got {}",
                self.luminosity_invpb
            ));
        }
        if self.datasets.is_empty() {
            return config_err("datasets: at least one dataset is required");
        }
        let mut datasets: Vec<DatasetDescriptor> = Vec::new();
        for (i, d) in self.datasets.iter().enumerate() {
            let at = format!("datasets[{i}]");
            if !filename_safe(&d.label) {
                return config_err(format!(
                    "{at}.label: `{}` must be non-empty and use only letters, digits, `_`, `-`, `.`",
                    d.label
                ));
            }
            if datasets.iter().any(|o| o.label == d.label) {
                return config_err(format!("{at}.label: `{}` is used twice", d.label));
            }
            let kind = match d.kind.as_str() {
                "data" => DatasetKind::Data,
                "mc" => DatasetKind::Mc,
                other => return config_err(format!("{at}.kind: expected `data` or `mc`, got `{other}`")),
            };
            match (kind, d.xsec_pb) {
                (DatasetKind::Mc, None) => return config_err(format!("{at}.xsec_pb: required for mc datasets")),
                (DatasetKind::Mc, Some(x)) if !(x.is_finite() && x > 0.0) => {
                    return config_err(format!("{at}.xsec_pb: must be finite and > 0, got {x}"))
                }
                (DatasetKind::Data, Some(_)) => {
                    return config_err(format!("{at}.xsec_pb: data datasets must not carry a cross section"))
                }
                _ => {}
            }
            if let Err(e) = glob::Pattern::new(&d.glob) {
                return config_err(format!("{at}.glob: {}", e.msg));
            }
            let glob = match base {
                Some(b) if Path::new(&d.glob).is_relative() => b.join(&d.glob).to_string_lossy().into_owned(),
                _ => d.glob.clone(),
            };
            datasets.push(DatasetDescriptor {
                glob,
                kind,
                cross_section_pb: d.xsec_pb,
                label: d.label.clone(),
            });
        }

        let schema = analysis_schema();
        let selection = self.selection.clone().unwrap_or_else(|| DEFAULT_SELECTION.to_string());
        let cut = parse_expr(&selection)
            .and_then(|e| typecheck_cut(&e, &schema))
            .map_err(|e| AnalysisError::Config(format!("selection: {e}")))?;

        let pairs: Vec<(String, String)> = match &self.projection {
            None => DEFAULT_PROJECTION
                .iter()
                .map(|(n, e)| (n.to_string(), e.to_string()))
                .collect(),
            Some(cols) if cols.is_empty() => flatten_schema(&schema, &FlattenRules::default())
                .map_err(|e| AnalysisError::Config(format!("projection: {e}")))?
                .into_iter()
                .map(|c| (c.column.name, c.path))
                .collect(),
            Some(cols) => cols.iter().map(|c| (c.name.clone(), c.expr.clone())).collect(),
        };
        if pairs.iter().any(|(n, _)| n == WEIGHT_COLUMN) {
            return config_err(format!(
                "projection: `{WEIGHT_COLUMN}` is reserved for the event weight"
            ));
        }
        let projection = parse_projection(pairs.iter().map(|(n, e)| (n.as_str(), e.as_str())))
            .and_then(|p| typecheck_projection(&p, &schema))
            .map_err(|e| AnalysisError::Config(format!("projection: {e}")))?;
        let mut columns = projection.columns().to_vec();
        columns.push(Column::new(WEIGHT_COLUMN, PrimitiveKind::F64));

        let mut histograms = Vec::with_capacity(self.histograms.len());
        for (i, h) in self.histograms.iter().enumerate() {
            let at = format!("histograms[{i}]");
            match columns.iter().find(|c| c.name == h.variable) {
                None => return config_err(format!("{at}.variable: no output column `{}`", h.variable)),
                Some(c) if c.kind == PrimitiveKind::Bool => {
                    return config_err(format!("{at}.variable: `{}` is boolean", h.variable))
                }
                Some(_) => {}
            }
            let spec = HistogramSpec::new(h.variable.clone(), h.nbins, h.lo, h.hi)
                .map_err(|e| AnalysisError::Config(format!("{at}: {e}")))?;
            histograms.push(spec);
        }

        let workers = self.workers.unwrap_or_else(default_workers);
        if workers == 0 {
            return config_err("workers: must be at least 1");
        }
        let partition = match &self.partition {
            None => PartitionMode::default(),
            Some(p) => partition_mode(p)?,
        };
        let group_rows = self.group_rows.unwrap_or(DEFAULT_GROUP_ROWS);
        if group_rows == 0 {
            return config_err("group_rows: must be at least 1");
        }
        Ok(Analysis {
            datasets,
            luminosity_invpb: self.luminosity_invpb,
            selection,
            cut,
            projection,
            columns,
            histograms,
            engine: EngineConfig {
                workers,
                cache_budget_bytes: self.cache_budget_bytes,
                partition,
            },
            persist: self.persist,
            group_rows,
        })
    }
}

fn partition_mode(p: &PartitionEntry) -> Result<PartitionMode, AnalysisError> {
    match (p.mode.as_str(), &p.custom) {
        ("auto", None) => {
            let target_bytes = p.target_bytes.unwrap_or(DEFAULT_TARGET_BYTES);
            if target_bytes == 0 {
                return config_err("partition.target_bytes: must be at least 1");
            }
            Ok(PartitionMode::Auto { target_bytes })
        }
        ("auto", Some(_)) => config_err("partition.custom: only allowed with mode `custom`"),
        ("custom", None) => config_err("partition.custom: required with mode `custom`"),
        ("custom", Some(_)) if p.target_bytes.is_some() => {
            config_err("partition.target_bytes: only allowed with mode `auto`")
        }
        ("custom", Some(CustomPlan::PerFile { per_file })) => {
            if *per_file == 0 {
                return config_err("partition.custom.per_file: must be at least 1");
            }
            Ok(PartitionMode::PerFile(*per_file))
        }
        ("custom", Some(CustomPlan::Ranges(ranges))) => Ok(PartitionMode::Explicit(
            ranges
                .iter()
                .map(|r| ExplicitRange {
                    file: r.file.clone(),
                    start: r.start,
                    end: r.end,
                })
                .collect(),
        )),
        (other, _) => config_err(format!("partition.mode: expected `auto` or `custom`, got `{other}`")),
    }
}

impl Analysis {
    /// Reads, parses and validates a config file; globs resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = fs::read_to_string(path).map_err(|source| AnalysisError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(PathBuf::from).unwrap_or_default();
        AnalysisConfig::from_json(&text)?.validate(Some(&base))
    }

    pub fn dataset(&self, label: &str) -> Result<&DatasetDescriptor, AnalysisError> {
        self.datasets
            .iter()
            .find(|d| d.label == label)
            .ok_or_else(|| AnalysisError::UnknownDataset(label.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> AnalysisConfig {
        AnalysisConfig::from_json(
            r#"{"datasets": [{"glob": "mc/*.evt", "kind": "mc", "xsec_pb": 2.0, "label": "ttbar"},
                             {"glob": "/abs/*.evt", "kind": "data", "label": "data"}],
                "luminosity_invpb": 1000.0,
                "histograms": [{"variable": "met_pt", "nbins": 10, "lo": 200.0, "hi": 1200.0}]}"#,
        )
        .unwrap()
    }

    fn err(c: &AnalysisConfig) -> String {
        match c.validate(None) {
            Err(AnalysisError::Config(m)) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_and_glob_resolution() {
        let a = base().validate(Some(Path::new("/cfg"))).unwrap();
        assert_eq!(a.selection, DEFAULT_SELECTION);
        assert_eq!(a.datasets[0].glob, "/cfg/mc/*.evt");
        assert_eq!(a.datasets[1].glob, "/abs/*.evt");
        assert_eq!(a.columns.last().unwrap().name, "weight");
        assert_eq!(a.columns.len(), DEFAULT_PROJECTION.len() + 1);
        assert!(a.persist);
    }

    #[test]
    fn empty_projection_flattens() {
        let mut c = base();
        c.projection = Some(vec![]);
        c.histograms.clear();
        let a = c.validate(None).unwrap();
        let names: Vec<_> = a.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            ["run", "lumi", "event", "genInfo_weight", "met_pt", "met_phi", "weight"]
        );
    }

    #[test]
    fn rejects_bad_fields() {
        let mut c = base();
        c.datasets[0].xsec_pb = None;
        assert!(err(&c).starts_with("datasets[0].xsec_pb"));

        let mut c = base();
        c.datasets[1].xsec_pb = Some(1.0);
        assert!(err(&c).starts_with("datasets[1].xsec_pb"));

        let mut c = base();
        c.luminosity_invpb = 0.0;
        assert!(err(&c).starts_with("luminosity_invpb"));

        let mut c = base();
        c.selection = Some("met.pt and true".into());
        assert!(err(&c).starts_with("selection"));

        let mut c = base();
        c.histograms[0].variable = "nope".into();
        assert!(err(&c).starts_with("histograms[0].variable"));

        let mut c = base();
        c.projection = Some(vec![ColumnEntry {
            name: "weight".into(),
            expr: "met.pt".into(),
        }]);
        assert!(err(&c).contains("reserved"));

        let mut c = base();
        c.datasets[1].label = "ttbar".into();
        assert!(err(&c).contains("used twice"));

        let mut c = base();
        c.datasets[1].label = "../x".into();
        assert!(err(&c).starts_with("datasets[1].label"));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = AnalysisConfig::from_json("{\n  \"datasets\": [,]\n}").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = AnalysisConfig::from_json(r#"{"datasets": [], "luminosity_invpb": 1, "bogus": 1}"#).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn partition_modes() {
        let mut c = base();
        c.partition = Some(PartitionEntry {
            mode: "custom".into(),
            target_bytes: None,
            custom: Some(CustomPlan::PerFile { per_file: 2 }),
        });
        assert_eq!(c.validate(None).unwrap().engine.partition, PartitionMode::PerFile(2));
        let parsed: PartitionEntry =
            serde_json::from_str(r#"{"mode": "custom", "custom": [{"file": "a.evt", "start": 0, "end": 3}]}"#).unwrap();
        assert!(matches!(partition_mode(&parsed).unwrap(), PartitionMode::Explicit(r) if r.len() == 1));
        c.partition = Some(PartitionEntry {
            mode: "sideways".into(),
            target_bytes: None,
            custom: None,
        });
        assert!(err(&c).starts_with("partition.mode"));
    }
}
