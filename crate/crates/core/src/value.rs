//! Dynamic values that conform to a [`SchemaNode`](crate::schema::SchemaNode).

use alloc::vec::Vec;
use core::mem::size_of;

use crate::schema::{PrimitiveKind, SchemaNode};

/// One primitive cell: a leaf of an event record or a column of an ntuple row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scalar {
    F64(f64),
    F32(f32),
    I64(i64),
    I32(i32),
    Bool(bool),
}

impl Scalar {
    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Scalar::F64(_) => PrimitiveKind::F64,
            Scalar::F32(_) => PrimitiveKind::F32,
            Scalar::I64(_) => PrimitiveKind::I64,
            Scalar::I32(_) => PrimitiveKind::I32,
            Scalar::Bool(_) => PrimitiveKind::Bool,
        }
    }

    /// Widens any numeric value to f64; booleans become 0.0 or 1.0.
    pub fn as_f64(&self) -> f64 {
        match *self {
            Scalar::F64(v) => v,
            Scalar::F32(v) => v as f64,
            Scalar::I64(v) => v as f64,
            Scalar::I32(v) => v as f64,
            Scalar::Bool(b) => b as u8 as f64,
        }
    }

    /// Bitwise equality, so that NaN payloads and signed zeros compare as written.
    pub fn bit_eq(&self, other: &Scalar) -> bool {
        match (self, other) {
            (Scalar::F64(a), Scalar::F64(b)) => a.to_bits() == b.to_bits(),
            (Scalar::F32(a), Scalar::F32(b)) => a.to_bits() == b.to_bits(),
            _ => self == other,
        }
    }
}

/// A flat ntuple row: one scalar per column, in column order.
pub type NtupleRow = Vec<Scalar>;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    F64(f64),
    F32(f32),
    I64(i64),
    I32(i32),
    Bool(bool),
    Array(Vec<Value>),
    /// Field values in schema declaration order.
    Record(Vec<Value>),
}

impl From<Scalar> for Value {
    fn from(s: Scalar) -> Self {
        match s {
            Scalar::F64(v) => Value::F64(v),
            Scalar::F32(v) => Value::F32(v),
            Scalar::I64(v) => Value::I64(v),
            Scalar::I32(v) => Value::I32(v),
            Scalar::Bool(v) => Value::Bool(v),
        }
    }
}

impl Value {
    pub fn as_scalar(&self) -> Option<Scalar> {
        Some(match *self {
            Value::F64(v) => Scalar::F64(v),
            Value::F32(v) => Scalar::F32(v),
            Value::I64(v) => Scalar::I64(v),
            Value::I32(v) => Scalar::I32(v),
            Value::Bool(v) => Scalar::Bool(v),
            Value::Array(_) | Value::Record(_) => return None,
        })
    }

    pub fn items(&self) -> Option<&[Value]> {
        match self {
            Value::Array(v) | Value::Record(v) => Some(v),
            _ => None,
        }
    }

    /// Shape check: true when this value can be encoded under `node`.
    pub fn conforms_to(&self, node: &SchemaNode) -> bool {
        match (self, node) {
            (Value::Array(items), SchemaNode::Array(elem)) => items.iter().all(|v| v.conforms_to(elem)),
            (Value::Record(values), SchemaNode::Record(fields)) => {
                values.len() == fields.len() && values.iter().zip(fields).all(|(v, f)| v.conforms_to(&f.node))
            }
            (v, SchemaNode::Primitive(kind)) => v.as_scalar().is_some_and(|s| s.kind() == *kind),
            _ => false,
        }
    }

    /// Approximate heap plus inline footprint, used for cache budgeting.
    pub fn footprint(&self) -> usize {
        size_of::<Value>() + self.heap_bytes()
    }

    fn heap_bytes(&self) -> usize {
        match self {
            Value::Array(v) | Value::Record(v) => {
                v.capacity() * size_of::<Value>() + v.iter().map(Value::heap_bytes).sum::<usize>()
            }
            _ => 0,
        }
    }

    /// Structural equality comparing floats by bit pattern.
    pub fn bit_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Array(a), Value::Array(b)) | (Value::Record(a), Value::Record(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.bit_eq(y))
            }
            (a, b) => match (a.as_scalar(), b.as_scalar()) {
                (Some(x), Some(y)) => x.bit_eq(&y),
                _ => false,
            },
        }
    }
}
