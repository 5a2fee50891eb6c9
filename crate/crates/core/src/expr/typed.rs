use alloc::boxed::Box;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::{ArithOp, CmpOp, Expr, ExprError, Path, Projection, ReduceOp, ELEMENT};
use crate::schema::{Column, PrimitiveKind, Schema, SchemaNode};

/// Static result type of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Bool,
    Num(PrimitiveKind),
}

impl Ty {
    pub fn kind(self) -> PrimitiveKind {
        match self {
            Ty::Bool => PrimitiveKind::Bool,
            Ty::Num(k) => k,
        }
    }
}

/// Where a resolved field path starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Origin {
    Event,
    Element,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Access {
    pub origin: Origin,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Field(Access, PrimitiveKind),
    Num(f64),
    Int(i64),
    Bool(bool),
    Compare(CmpOp, Box<Node>, Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Not(Box<Node>),
    Arith(ArithOp, Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Size(Access),
    Count(Access, Box<Node>),
    Reduce(ReduceOp, Access, Box<Node>),
}

/// An expression resolved against a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedExpr {
    pub(crate) node: Node,
    ty: Ty,
}

impl TypedExpr {
    pub fn ty(&self) -> Ty {
        self.ty
    }
}

/// A projection resolved against a schema: output columns plus their expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedProjection {
    pub(crate) columns: Vec<Column>,
    pub(crate) exprs: Vec<TypedExpr>,
}

impl TypedProjection {
    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    /// Appends a column; used to attach bookkeeping columns such as weights.
    pub fn push(&mut self, name: &str, expr: TypedExpr) -> Result<(), ExprError> {
        if self.columns.iter().any(|c| c.name == name) {
            return Err(ExprError::DuplicateColumn(name.to_string()));
        }
        self.columns.push(Column::new(name, expr.ty.kind()));
        self.exprs.push(expr);
        Ok(())
    }
}

struct Scope<'a> {
    root: &'a SchemaNode,
    /// Element schema of the innermost enclosing collection function.
    element: Option<&'a SchemaNode>,
}

fn resolve<'a>(path: &Path, scope: &Scope<'a>) -> Result<(Access, &'a SchemaNode), ExprError> {
    let unknown = || ExprError::UnknownField(path.to_string());
    let (origin, mut node, segs) = match path.0.split_first() {
        Some((head, rest)) if head == ELEMENT => match scope.element {
            Some(elem) => (Origin::Element, elem, rest),
            None => {
                return Err(ExprError::UnknownField(format!(
                    "{path} (`{ELEMENT}` is only bound inside count/max/min/sum)"
                )))
            }
        },
        _ => (Origin::Event, scope.root, &path.0[..]),
    };
    let mut indices = Vec::with_capacity(segs.len());
    for seg in segs {
        let (i, child) = node.field(seg).ok_or_else(unknown)?;
        indices.push(i);
        node = child;
    }
    Ok((Access { origin, indices }, node))
}

fn resolve_collection<'a>(path: &Path, scope: &Scope<'a>) -> Result<(Access, &'a SchemaNode), ExprError> {
    match resolve(path, scope)? {
        (access, SchemaNode::Array(elem)) => Ok((access, elem)),
        _ => Err(ExprError::TypeMismatch(format!("`{path}` is not a collection"))),
    }
}

fn numeric(e: &TypedExpr, what: &str) -> Result<(), ExprError> {
    match e.ty {
        Ty::Num(_) => Ok(()),
        Ty::Bool => Err(ExprError::TypeMismatch(format!(
            "{what} needs numeric operands, found bool"
        ))),
    }
}

fn boolean(e: &TypedExpr, what: &str) -> Result<(), ExprError> {
    match e.ty {
        Ty::Bool => Ok(()),
        Ty::Num(k) => Err(ExprError::TypeMismatch(format!(
            "{what} needs boolean operands, found {k}"
        ))),
    }
}

fn check(expr: &Expr, scope: &Scope<'_>) -> Result<TypedExpr, ExprError> {
    let typed = |node, ty| Ok(TypedExpr { node, ty });
    match expr {
        Expr::Field(path) => match resolve(path, scope)? {
            (access, SchemaNode::Primitive(kind)) => {
                let ty = if *kind == PrimitiveKind::Bool {
                    Ty::Bool
                } else {
                    Ty::Num(*kind)
                };
                typed(Node::Field(access, *kind), ty)
            }
            _ => Err(ExprError::TypeMismatch(format!("`{path}` is not a scalar field"))),
        },
        Expr::Num { value, integral } => {
            if *integral && *value > -9.0e15 && *value < 9.0e15 && (*value as i64) as f64 == *value {
                typed(Node::Int(*value as i64), Ty::Num(PrimitiveKind::I64))
            } else {
                typed(Node::Num(*value), Ty::Num(PrimitiveKind::F64))
            }
        }
        Expr::Bool(b) => typed(Node::Bool(*b), Ty::Bool),
        Expr::Compare(op, a, b) => {
            let (a, b) = (check(a, scope)?, check(b, scope)?);
            let what = format!("comparison `{}`", op.symbol());
            numeric(&a, &what)?;
            numeric(&b, &what)?;
            typed(Node::Compare(*op, Box::new(a.node), Box::new(b.node)), Ty::Bool)
        }
        Expr::And(a, b) | Expr::Or(a, b) => {
            let (a, b) = (check(a, scope)?, check(b, scope)?);
            let is_and = matches!(expr, Expr::And(..));
            let what = if is_and { "`and`" } else { "`or`" };
            boolean(&a, what)?;
            boolean(&b, what)?;
            let (a, b) = (Box::new(a.node), Box::new(b.node));
            typed(if is_and { Node::And(a, b) } else { Node::Or(a, b) }, Ty::Bool)
        }
        Expr::Not(a) => {
            let a = check(a, scope)?;
            boolean(&a, "`not`")?;
            typed(Node::Not(Box::new(a.node)), Ty::Bool)
        }
        Expr::Arith(op, a, b) => {
            let (a, b) = (check(a, scope)?, check(b, scope)?);
            let what = format!("arithmetic `{}`", op.symbol());
            numeric(&a, &what)?;
            numeric(&b, &what)?;
            typed(
                Node::Arith(*op, Box::new(a.node), Box::new(b.node)),
                Ty::Num(PrimitiveKind::F64),
            )
        }
        Expr::Neg(a) => {
            let a = check(a, scope)?;
            numeric(&a, "negation")?;
            typed(Node::Neg(Box::new(a.node)), Ty::Num(PrimitiveKind::F64))
        }
        Expr::Size(path) => {
            let (access, _) = resolve_collection(path, scope)?;
            typed(Node::Size(access), Ty::Num(PrimitiveKind::I64))
        }
        Expr::Count(path, pred) => {
            let (access, elem) = resolve_collection(path, scope)?;
            let inner = Scope {
                root: scope.root,
                element: Some(elem),
            };
            let pred = check(pred, &inner)?;
            boolean(&pred, "`count` predicate")?;
            typed(Node::Count(access, Box::new(pred.node)), Ty::Num(PrimitiveKind::I64))
        }
        Expr::Reduce(op, path, body) => {
            let (access, elem) = resolve_collection(path, scope)?;
            let inner = Scope {
                root: scope.root,
                element: Some(elem),
            };
            let body = check(body, &inner)?;
            numeric(&body, op.name())?;
            typed(
                Node::Reduce(*op, access, Box::new(body.node)),
                Ty::Num(PrimitiveKind::F64),
            )
        }
    }
}

/// Resolves and type-checks an expression of any result type.
pub fn typecheck(expr: &Expr, schema: &Schema) -> Result<TypedExpr, ExprError> {
    check(
        expr,
        &Scope {
            root: schema.root(),
            element: None,
        },
    )
}

/// Type-checks a selection; the result must be boolean.
pub fn typecheck_cut(expr: &Expr, schema: &Schema) -> Result<TypedExpr, ExprError> {
    let t = typecheck(expr, schema)?;
    boolean(&t, "a selection")?;
    Ok(t)
}

fn is_scalar_expr(e: &Expr) -> bool {
    match e {
        Expr::Field(_) | Expr::Num { .. } | Expr::Bool(_) | Expr::Size(_) | Expr::Count(..) | Expr::Reduce(..) => true,
        Expr::Arith(_, a, b) => is_scalar_expr(a) && is_scalar_expr(b),
        Expr::Neg(a) => is_scalar_expr(a),
        Expr::Compare(..) | Expr::And(..) | Expr::Or(..) | Expr::Not(_) => false,
    }
}

/// Type-checks a projection. Columns must be unique and each expression must
/// belong to the scalar subset (no comparisons or boolean connectives at top level).
pub fn typecheck_projection(proj: &Projection, schema: &Schema) -> Result<TypedProjection, ExprError> {
    let mut out = TypedProjection {
        columns: Vec::with_capacity(proj.columns.len()),
        exprs: Vec::with_capacity(proj.columns.len()),
    };
    for (name, expr) in &proj.columns {
        if !is_scalar_expr(expr) {
            return Err(ExprError::NonScalarProjection(name.clone()));
        }
        let typed = match typecheck(expr, schema) {
            Err(ExprError::TypeMismatch(msg)) if matches!(expr, Expr::Field(_)) && msg.contains("not a scalar") => {
                return Err(ExprError::NonScalarProjection(name.clone()))
            }
            other => other?,
        };
        out.push(name, typed)?;
    }
    Ok(out)
}
