//! Canonical JSON for schemas and flat column lists.
//!
//! A record is an object whose keys are the field names in declaration order,
//! an array is a one-element list holding the element schema, and a primitive
//! is its kind name: `{"met":{"pt":"f64"},"jets":[{"pt":"f64"}]}`. Output has
//! no insignificant whitespace.

use hepskim_core::schema::{Field, PrimitiveKind, Schema, SchemaNode};
use hepskim_core::Column;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::StorageError;

fn corrupt(msg: impl Into<String>) -> StorageError {
    StorageError::CorruptHeader(msg.into())
}

fn write_node(node: &SchemaNode, out: &mut String) {
    match node {
        SchemaNode::Primitive(k) => {
            out.push('"');
            out.push_str(k.name());
            out.push('"');
        }
        SchemaNode::Array(elem) => {
            out.push('[');
            write_node(elem, out);
            out.push(']');
        }
        SchemaNode::Record(fields) => {
            out.push('{');
            for (i, f) in fields.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(&f.name).expect("strings serialize"));
                out.push(':');
                write_node(&f.node, out);
            }
            out.push('}');
        }
    }
}

pub fn schema_to_json(schema: &Schema) -> String {
    let mut out = String::new();
    write_node(schema.root(), &mut out);
    out
}

fn read_node(v: &Json, depth: usize) -> Result<SchemaNode, StorageError> {
    if depth > hepskim_core::schema::MAX_DEPTH {
        return Err(corrupt("schema nests too deeply"));
    }
    match v {
        Json::String(kind) => PrimitiveKind::from_name(kind)
            .map(SchemaNode::Primitive)
            .ok_or_else(|| corrupt(format!("unknown primitive kind `{kind}`"))),
        Json::Array(items) if items.len() == 1 => Ok(SchemaNode::array(read_node(&items[0], depth + 1)?)),
        Json::Object(map) => map
            .iter()
            .map(|(name, node)| Ok(Field::new(name.clone(), read_node(node, depth + 1)?)))
            .collect::<Result<Vec<_>, _>>()
            .map(SchemaNode::Record),
        other => Err(corrupt(format!("unexpected schema node {other}"))),
    }
}

pub fn schema_from_json(bytes: &[u8]) -> Result<Schema, StorageError> {
    let v: Json = serde_json::from_slice(bytes).map_err(|e| corrupt(format!("schema is not valid JSON: {e}")))?;
    Schema::new(read_node(&v, 1)?).map_err(|e| corrupt(e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct ColumnJson {
    name: String,
    kind: String,
}

pub fn columns_to_json(columns: &[Column]) -> String {
    let cols: Vec<ColumnJson> = columns
        .iter()
        .map(|c| ColumnJson {
            name: c.name.clone(),
            kind: c.kind.name().to_string(),
        })
        .collect();
    serde_json::to_string(&cols).expect("columns serialize")
}

pub fn columns_from_json(bytes: &[u8]) -> Result<Vec<Column>, StorageError> {
    let cols: Vec<ColumnJson> =
        serde_json::from_slice(bytes).map_err(|e| corrupt(format!("column header is not valid JSON: {e}")))?;
    let mut out: Vec<Column> = Vec::with_capacity(cols.len());
    for c in cols {
        let kind =
            PrimitiveKind::from_name(&c.kind).ok_or_else(|| corrupt(format!("unknown column kind `{}`", c.kind)))?;
        if out.iter().any(|o| o.name == c.name) {
            return Err(corrupt(format!("duplicate column `{}`", c.name)));
        }
        out.push(Column::new(c.name, kind));
    }
    Ok(out)
}
