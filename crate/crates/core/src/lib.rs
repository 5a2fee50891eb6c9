//! Core of the hepskim event-analysis toolkit.
//!
//! Everything here needs only `alloc`: the schema type system and the
//! analysis event layout, the cut/projection expression language, the binary
//! record codec used inside EVT blocks, partition planning, order-fixed
//! reductions, weighted histograms and MC weight normalization. File formats,
//! the worker pool and the command line live in the `hepskim` crate.
#![no_std]

extern crate alloc;

pub mod codec;
pub mod event;
pub mod expr;
pub mod histogram;
pub mod plan;
pub mod reduce;
pub mod schema;
pub mod value;
pub mod weight;

pub use event::{analysis_schema, Event, Met, Particle};
pub use expr::{Expr, ExprError, Projection, TypedExpr, TypedProjection};
pub use histogram::{fill_histogram, Histogram, HistogramError, HistogramSpec};
pub use schema::{Column, PrimitiveKind, Schema, SchemaError, SchemaNode};
pub use value::{NtupleRow, Scalar, Value};
