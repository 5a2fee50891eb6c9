//! Binary record encoding.
//!
//! Primitives are little-endian (IEEE-754 for floats, one byte for bools),
//! arrays carry a u32 element count, and records are encoded field by field
//! in schema order. There is no padding and no per-value tagging.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::schema::{PrimitiveKind, SchemaNode};
use crate::value::{Scalar, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("value does not conform to the schema at `{0}`")]
    SchemaViolation(String),
    #[error("payload ended while decoding")]
    Truncated,
    #[error("invalid boolean byte {0:#04x}")]
    BadBool(u8),
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
    #[error("array of {0} elements exceeds the u32 count limit")]
    ArrayTooLong(usize),
}

pub fn encode_scalar(s: Scalar, out: &mut Vec<u8>) {
    match s {
        Scalar::F64(v) => out.extend_from_slice(&v.to_le_bytes()),
        Scalar::F32(v) => out.extend_from_slice(&v.to_le_bytes()),
        Scalar::I64(v) => out.extend_from_slice(&v.to_le_bytes()),
        Scalar::I32(v) => out.extend_from_slice(&v.to_le_bytes()),
        Scalar::Bool(v) => out.push(v as u8),
    }
}

/// Appends the encoding of `value` under `node`, or reports the first
/// non-conforming path. Nothing is appended on error.
pub fn encode_value(node: &SchemaNode, value: &Value, out: &mut Vec<u8>) -> Result<(), CodecError> {
    let mark = out.len();
    let res = encode_into(node, value, out, &mut String::new());
    if res.is_err() {
        out.truncate(mark);
    }
    res
}

fn encode_into(node: &SchemaNode, value: &Value, out: &mut Vec<u8>, path: &mut String) -> Result<(), CodecError> {
    let violation = |path: &String| {
        CodecError::SchemaViolation(if path.is_empty() {
            String::from(".")
        } else {
            path.clone()
        })
    };
    match (node, value) {
        (SchemaNode::Primitive(kind), v) => match v.as_scalar() {
            Some(s) if s.kind() == *kind => {
                encode_scalar(s, out);
                Ok(())
            }
            _ => Err(violation(path)),
        },
        (SchemaNode::Array(elem), Value::Array(items)) => {
            let n = u32::try_from(items.len()).map_err(|_| CodecError::ArrayTooLong(items.len()))?;
            out.extend_from_slice(&n.to_le_bytes());
            for (i, item) in items.iter().enumerate() {
                let len = path.len();
                path.push_str(&format!("[{i}]"));
                encode_into(elem, item, out, path)?;
                path.truncate(len);
            }
            Ok(())
        }
        (SchemaNode::Record(fields), Value::Record(values)) if fields.len() == values.len() => {
            for (f, v) in fields.iter().zip(values) {
                let len = path.len();
                if !path.is_empty() {
                    path.push('.');
                }
                path.push_str(&f.name);
                encode_into(&f.node, v, out, path)?;
                path.truncate(len);
            }
            Ok(())
        }
        _ => Err(violation(path)),
    }
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8], CodecError> {
    if buf.len() < n {
        return Err(CodecError::Truncated);
    }
    let (head, tail) = buf.split_at(n);
    *buf = tail;
    Ok(head)
}

fn take_array<const N: usize>(buf: &mut &[u8]) -> Result<[u8; N], CodecError> {
    Ok(take(buf, N)?.try_into().expect("length checked"))
}

pub fn decode_scalar(kind: PrimitiveKind, buf: &mut &[u8]) -> Result<Scalar, CodecError> {
    Ok(match kind {
        PrimitiveKind::F64 => Scalar::F64(f64::from_le_bytes(take_array(buf)?)),
        PrimitiveKind::F32 => Scalar::F32(f32::from_le_bytes(take_array(buf)?)),
        PrimitiveKind::I64 => Scalar::I64(i64::from_le_bytes(take_array(buf)?)),
        PrimitiveKind::I32 => Scalar::I32(i32::from_le_bytes(take_array(buf)?)),
        PrimitiveKind::Bool => match take_array::<1>(buf)?[0] {
            0 => Scalar::Bool(false),
            1 => Scalar::Bool(true),
            b => return Err(CodecError::BadBool(b)),
        },
    })
}

/// Decodes one value, advancing `buf` past it.
pub fn decode_value(node: &SchemaNode, buf: &mut &[u8]) -> Result<Value, CodecError> {
    match node {
        SchemaNode::Primitive(kind) => decode_scalar(*kind, buf).map(Value::from),
        SchemaNode::Array(elem) => {
            let n = u32::from_le_bytes(take_array(buf)?) as usize;
            // Every element occupies at least one byte, which bounds hostile counts.
            if n > buf.len() && min_width(elem) > 0 {
                return Err(CodecError::Truncated);
            }
            let mut items = Vec::with_capacity(n.min(buf.len()));
            for _ in 0..n {
                items.push(decode_value(elem, buf)?);
            }
            Ok(Value::Array(items))
        }
        SchemaNode::Record(fields) => {
            let mut values = Vec::with_capacity(fields.len());
            for f in fields {
                values.push(decode_value(&f.node, buf)?);
            }
            Ok(Value::Record(values))
        }
    }
}

fn min_width(node: &SchemaNode) -> usize {
    match node {
        SchemaNode::Primitive(k) => k.width(),
        SchemaNode::Array(_) => 4,
        SchemaNode::Record(fields) => fields.iter().map(|f| min_width(&f.node)).sum(),
    }
}

/// Decodes exactly `count` records from `payload`, requiring it to be fully consumed.
pub fn decode_records(node: &SchemaNode, mut payload: &[u8], count: usize) -> Result<Vec<Value>, CodecError> {
    let mut out = Vec::with_capacity(count.min(payload.len()));
    for _ in 0..count {
        out.push(decode_value(node, &mut payload)?);
    }
    if !payload.is_empty() {
        return Err(CodecError::TrailingBytes(payload.len()));
    }
    Ok(out)
}
