//! Cut and projection expressions.
//!
//! Text is parsed into an untyped [`Expr`] tree, then [`typecheck`] resolves
//! every field path against a [`Schema`](crate::schema::Schema) and produces a
//! [`TypedExpr`] whose evaluation is total on conforming events.

mod eval;
mod parse;
mod typed;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

pub use eval::{eval_cut, eval_projection};
pub use parse::{parse_expr, parse_projection};
pub use typed::{typecheck, typecheck_cut, typecheck_projection, Ty, TypedExpr, TypedProjection};

/// Name that binds the current element inside `count`, `max`, `min` and `sum`.
pub const ELEMENT: &str = "it";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    /// IEEE-754 comparison; any NaN operand makes every operator false, `!=` included.
    pub fn apply(self, a: f64, b: f64) -> bool {
        if a.is_nan() || b.is_nan() {
            return false;
        }
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            ArithOp::Add => a + b,
            ArithOp::Sub => a - b,
            ArithOp::Mul => a * b,
            ArithOp::Div => a / b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Max,
    Min,
    Sum,
}

impl ReduceOp {
    pub fn name(self) -> &'static str {
        match self {
            ReduceOp::Max => "max",
            ReduceOp::Min => "min",
            ReduceOp::Sum => "sum",
        }
    }
}

/// A dotted field path such as `met.pt` or `it.eta`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path(pub Vec<String>);

impl Path {
    pub fn parse(dotted: &str) -> Path {
        Path(dotted.split('.').map(String::from).collect())
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, seg) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            f.write_str(seg)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Field(Path),
    /// Numeric literal; `integral` records whether it was written without a fraction or exponent.
    Num {
        value: f64,
        integral: bool,
    },
    Bool(bool),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Size(Path),
    Count(Path, Box<Expr>),
    Reduce(ReduceOp, Path, Box<Expr>),
}

impl Expr {
    pub fn field(dotted: &str) -> Expr {
        Expr::Field(Path::parse(dotted))
    }

    pub fn num(value: f64) -> Expr {
        Expr::Num { value, integral: false }
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::Compare(op, Box::new(a), Box::new(b))
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Expr) -> Expr {
        Expr::Not(Box::new(a))
    }
}

/// Renders an expression back into the text grammar, fully parenthesized.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Field(p) => write!(f, "{p}"),
            Expr::Num { value, integral: true } => write!(f, "{}", *value as i64),
            Expr::Num { value, .. } => write!(f, "{value:?}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Compare(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::And(a, b) => write!(f, "({a} and {b})"),
            Expr::Or(a, b) => write!(f, "({a} or {b})"),
            Expr::Not(a) => write!(f, "(not {a})"),
            Expr::Arith(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Size(p) => write!(f, "size({p})"),
            Expr::Count(p, e) => write!(f, "count({p}, {e})"),
            Expr::Reduce(op, p, e) => write!(f, "{}({p}, {e})", op.name()),
        }
    }
}

/// Ordered list of named scalar expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub columns: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("projection column `{0}` is not a scalar expression")]
    NonScalarProjection(String),
    #[error("duplicate projection column `{0}`")]
    DuplicateColumn(String),
}
