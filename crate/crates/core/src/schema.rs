//! Self-describing type trees for event records.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Maximum nesting depth of a schema tree, counting the root record as depth 1.
pub const MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimitiveKind {
    F64,
    F32,
    I64,
    I32,
    Bool,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 5] = [
        PrimitiveKind::F64,
        PrimitiveKind::F32,
        PrimitiveKind::I64,
        PrimitiveKind::I32,
        PrimitiveKind::Bool,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::F64 => "f64",
            PrimitiveKind::F32 => "f32",
            PrimitiveKind::I64 => "i64",
            PrimitiveKind::I32 => "i32",
            PrimitiveKind::Bool => "bool",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Encoded width in bytes.
    pub fn width(self) -> usize {
        match self {
            PrimitiveKind::F64 | PrimitiveKind::I64 => 8,
            PrimitiveKind::F32 | PrimitiveKind::I32 => 4,
            PrimitiveKind::Bool => 1,
        }
    }

    pub fn is_numeric(self) -> bool {
        !matches!(self, PrimitiveKind::Bool)
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemaNode {
    Primitive(PrimitiveKind),
    Array(Box<SchemaNode>),
    Record(Vec<Field>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub name: String,
    pub node: SchemaNode,
}

impl Field {
    pub fn new(name: impl Into<String>, node: SchemaNode) -> Self {
        Field {
            name: name.into(),
            node,
        }
    }
}

impl SchemaNode {
    pub fn array(element: SchemaNode) -> Self {
        SchemaNode::Array(Box::new(element))
    }

    pub fn record<I, S>(fields: I) -> Self
    where
        I: IntoIterator<Item = (S, SchemaNode)>,
        S: Into<String>,
    {
        SchemaNode::Record(fields.into_iter().map(|(name, node)| Field::new(name, node)).collect())
    }

    /// Looks up a direct child of a record node.
    pub fn field(&self, name: &str) -> Option<(usize, &SchemaNode)> {
        match self {
            SchemaNode::Record(fields) => fields
                .iter()
                .enumerate()
                .find(|(_, f)| f.name == name)
                .map(|(i, f)| (i, &f.node)),
            _ => None,
        }
    }

    fn depth(&self) -> usize {
        match self {
            SchemaNode::Primitive(_) => 1,
            SchemaNode::Array(e) => 1 + e.depth(),
            SchemaNode::Record(fields) => 1 + fields.iter().map(|f| f.node.depth()).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("schema root must be a record")]
    RootNotRecord,
    #[error("duplicate field name `{name}` in record at `{path}`")]
    DuplicateField { path: String, name: String },
    #[error("schema nesting depth {depth} exceeds the limit of {MAX_DEPTH}")]
    TooDeep { depth: usize },
    #[error("two paths flatten to the column name `{0}`")]
    NameCollision(String),
}

/// A validated schema. The root is always a record.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    root: SchemaNode,
}

impl Schema {
    pub fn new(root: SchemaNode) -> Result<Self, SchemaError> {
        if !matches!(root, SchemaNode::Record(_)) {
            return Err(SchemaError::RootNotRecord);
        }
        let depth = root.depth();
        if depth > MAX_DEPTH {
            return Err(SchemaError::TooDeep { depth });
        }
        check_unique(&root, &mut String::new())?;
        Ok(Schema { root })
    }

    pub fn root(&self) -> &SchemaNode {
        &self.root
    }

    pub fn fields(&self) -> &[Field] {
        match &self.root {
            SchemaNode::Record(fields) => fields,
            _ => unreachable!("validated root is a record"),
        }
    }
}

fn check_unique(node: &SchemaNode, path: &mut String) -> Result<(), SchemaError> {
    match node {
        SchemaNode::Primitive(_) => Ok(()),
        SchemaNode::Array(e) => {
            let len = path.len();
            path.push_str("[]");
            check_unique(e, path)?;
            path.truncate(len);
            Ok(())
        }
        SchemaNode::Record(fields) => {
            for (i, f) in fields.iter().enumerate() {
                if fields[..i].iter().any(|g| g.name == f.name) {
                    return Err(SchemaError::DuplicateField {
                        path: if path.is_empty() { ".".to_string() } else { path.clone() },
                        name: f.name.clone(),
                    });
                }
                let len = path.len();
                if !path.is_empty() {
                    path.push('.');
                }
                path.push_str(&f.name);
                check_unique(&f.node, path)?;
                path.truncate(len);
            }
            Ok(())
        }
    }
}

/// Options for [`flatten_schema`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlattenRules {
    pub separator: String,
}

impl Default for FlattenRules {
    fn default() -> Self {
        FlattenRules {
            separator: "_".to_string(),
        }
    }
}

/// A flat output column: a name plus a primitive kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: PrimitiveKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: PrimitiveKind) -> Self {
        Column {
            name: name.into(),
            kind,
        }
    }
}

/// A flattened column together with the dotted path it was derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatColumn {
    pub column: Column,
    pub path: String,
}

/// Joins nested record paths into flat column names (`met.pt` becomes
/// `met_pt`). Arrays are skipped: collections only reach an ntuple through
/// projection expressions.
pub fn flatten_schema(schema: &Schema, rules: &FlattenRules) -> Result<Vec<FlatColumn>, SchemaError> {
    let mut out: Vec<FlatColumn> = Vec::new();
    let mut name = String::new();
    let mut path = String::new();
    flatten_into(schema.fields(), rules, &mut name, &mut path, &mut out);
    for (i, c) in out.iter().enumerate() {
        if out[..i].iter().any(|d| d.column.name == c.column.name) {
            return Err(SchemaError::NameCollision(c.column.name.clone()));
        }
    }
    Ok(out)
}

fn flatten_into(
    fields: &[Field],
    rules: &FlattenRules,
    name: &mut String,
    path: &mut String,
    out: &mut Vec<FlatColumn>,
) {
    for f in fields {
        let (nl, pl) = (name.len(), path.len());
        if !name.is_empty() {
            name.push_str(&rules.separator);
            path.push('.');
        }
        name.push_str(&f.name);
        path.push_str(&f.name);
        match &f.node {
            SchemaNode::Primitive(kind) => out.push(FlatColumn {
                column: Column::new(name.clone(), *kind),
                path: path.clone(),
            }),
            SchemaNode::Record(inner) => flatten_into(inner, rules, name, path, out),
            SchemaNode::Array(_) => {}
        }
        name.truncate(nl);
        path.truncate(pl);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn prim(k: PrimitiveKind) -> SchemaNode {
        SchemaNode::Primitive(k)
    }

    #[test]
    fn root_must_be_record() {
        assert_eq!(Schema::new(prim(PrimitiveKind::F64)), Err(SchemaError::RootNotRecord));
    }

    #[test]
    fn duplicate_names_rejected_case_sensitive() {
        let dup = SchemaNode::record([("a", prim(PrimitiveKind::F64)), ("a", prim(PrimitiveKind::I32))]);
        assert!(matches!(Schema::new(dup), Err(SchemaError::DuplicateField { .. })));
        let ok = SchemaNode::record([("a", prim(PrimitiveKind::F64)), ("A", prim(PrimitiveKind::I32))]);
        assert!(Schema::new(ok).is_ok());
    }

    #[test]
    fn depth_limit() {
        let mut node = prim(PrimitiveKind::Bool);
        for _ in 0..15 {
            node = SchemaNode::record([("x", node)]);
        }
        assert!(Schema::new(node.clone()).is_ok());
        let deeper = SchemaNode::record([("x", node)]);
        assert_eq!(Schema::new(deeper), Err(SchemaError::TooDeep { depth: 17 }));
    }

    #[test]
    fn flatten_nested_records() {
        let schema = Schema::new(SchemaNode::record([(
            "met",
            SchemaNode::record([("pt", prim(PrimitiveKind::F64)), ("phi", prim(PrimitiveKind::F64))]),
        )]))
        .unwrap();
        let cols = flatten_schema(&schema, &FlattenRules::default()).unwrap();
        let names: Vec<&str> = cols.iter().map(|c| c.column.name.as_str()).collect();
        assert_eq!(names, vec!["met_pt", "met_phi"]);
        assert_eq!(cols[0].path, "met.pt");
    }

    #[test]
    fn flatten_collision() {
        let schema = Schema::new(SchemaNode::record([
            ("a_b", prim(PrimitiveKind::F64)),
            ("a", SchemaNode::record([("b", prim(PrimitiveKind::F64))])),
        ]))
        .unwrap();
        assert_eq!(
            flatten_schema(&schema, &FlattenRules::default()),
            Err(SchemaError::NameCollision("a_b".into()))
        );
    }

    #[test]
    fn flatten_skips_arrays() {
        let schema = Schema::new(SchemaNode::record([
            ("xs", SchemaNode::array(prim(PrimitiveKind::F64))),
            ("n", prim(PrimitiveKind::I32)),
        ]))
        .unwrap();
        let cols = flatten_schema(&schema, &FlattenRules::default()).unwrap();
        assert_eq!(cols.len(), 1);
        assert_eq!(cols[0].column, Column::new("n", PrimitiveKind::I32));
    }
}
