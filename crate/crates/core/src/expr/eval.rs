use super::typed::{Access, Node, Origin, Ty, TypedExpr, TypedProjection};
use super::ReduceOp;
use crate::value::{NtupleRow, Scalar, Value};

#[derive(Clone, Copy)]
struct Ctx<'a> {
    event: &'a Value,
    element: Option<&'a Value>,
}

impl<'a> Ctx<'a> {
    fn get(&self, access: &Access) -> Option<&'a Value> {
        let mut v = match access.origin {
            Origin::Event => self.event,
            Origin::Element => self.element?,
        };
        for &i in &access.indices {
            v = v.items()?.get(i)?;
        }
        Some(v)
    }

    fn items(&self, access: &Access) -> &'a [Value] {
        match self.get(access) {
            Some(Value::Array(items)) => items,
            _ => &[],
        }
    }

    fn with(self, element: &'a Value) -> Ctx<'a> {
        Ctx {
            event: self.event,
            element: Some(element),
        }
    }
}

fn num(node: &Node, ctx: Ctx<'_>) -> f64 {
    match node {
        Node::Field(access, _) => ctx
            .get(access)
            .and_then(Value::as_scalar)
            .map_or(f64::NAN, |s| s.as_f64()),
        Node::Num(v) => *v,
        Node::Int(v) => *v as f64,
        Node::Arith(op, a, b) => op.apply(num(a, ctx), num(b, ctx)),
        Node::Neg(a) => -num(a, ctx),
        Node::Size(access) => ctx.items(access).len() as f64,
        Node::Count(access, pred) => count(access, pred, ctx) as f64,
        Node::Reduce(op, access, body) => reduce(*op, access, body, ctx),
        Node::Bool(_) | Node::Compare(..) | Node::And(..) | Node::Or(..) | Node::Not(_) => {
            truth(node, ctx) as u8 as f64
        }
    }
}

fn truth(node: &Node, ctx: Ctx<'_>) -> bool {
    match node {
        Node::Bool(b) => *b,
        Node::Field(access, _) => matches!(ctx.get(access), Some(Value::Bool(true))),
        Node::Compare(op, a, b) => op.apply(num(a, ctx), num(b, ctx)),
        Node::And(a, b) => truth(a, ctx) && truth(b, ctx),
        Node::Or(a, b) => truth(a, ctx) || truth(b, ctx),
        Node::Not(a) => !truth(a, ctx),
        _ => num(node, ctx) != 0.0,
    }
}

fn count(access: &Access, pred: &Node, ctx: Ctx<'_>) -> i64 {
    ctx.items(access).iter().filter(|e| truth(pred, ctx.with(e))).count() as i64
}

/// Max and min over an empty collection are 0.0.
fn reduce(op: ReduceOp, access: &Access, body: &Node, ctx: Ctx<'_>) -> f64 {
    let mut values = ctx.items(access).iter().map(|e| num(body, ctx.with(e)));
    match op {
        ReduceOp::Sum => values.fold(0.0, |acc, v| acc + v),
        ReduceOp::Max => values.next().map_or(0.0, |first| values.fold(first, f64::max)),
        ReduceOp::Min => values.next().map_or(0.0, |first| values.fold(first, f64::min)),
    }
}

fn scalar(node: &Node, ty: Ty, ctx: Ctx<'_>) -> Scalar {
    match node {
        Node::Field(access, kind) => ctx
            .get(access)
            .and_then(Value::as_scalar)
            .filter(|s| s.kind() == *kind)
            .unwrap_or(match kind {
                crate::schema::PrimitiveKind::F64 => Scalar::F64(f64::NAN),
                crate::schema::PrimitiveKind::F32 => Scalar::F32(f32::NAN),
                crate::schema::PrimitiveKind::I64 => Scalar::I64(0),
                crate::schema::PrimitiveKind::I32 => Scalar::I32(0),
                crate::schema::PrimitiveKind::Bool => Scalar::Bool(false),
            }),
        Node::Int(v) => Scalar::I64(*v),
        Node::Size(access) => Scalar::I64(ctx.items(access).len() as i64),
        Node::Count(access, pred) => Scalar::I64(count(access, pred, ctx)),
        _ if ty == Ty::Bool => Scalar::Bool(truth(node, ctx)),
        _ => Scalar::F64(num(node, ctx)),
    }
}

impl TypedExpr {
    /// Evaluates a boolean expression. Total: never panics on any value.
    pub fn eval_bool(&self, event: &Value) -> bool {
        truth(&self.node, Ctx { event, element: None })
    }

    /// Evaluates to f64, widening integers; booleans map to 0.0 or 1.0.
    pub fn eval_f64(&self, event: &Value) -> f64 {
        num(&self.node, Ctx { event, element: None })
    }

    /// Evaluates to a scalar of the expression's static type.
    pub fn eval_scalar(&self, event: &Value) -> Scalar {
        scalar(&self.node, self.ty(), Ctx { event, element: None })
    }
}

impl TypedProjection {
    /// One flat row with columns in declaration order.
    pub fn eval(&self, event: &Value) -> NtupleRow {
        self.exprs.iter().map(|e| e.eval_scalar(event)).collect()
    }
}

/// Evaluates a selection against one event.
pub fn eval_cut(cut: &TypedExpr, event: &Value) -> bool {
    cut.eval_bool(event)
}

/// Evaluates a projection against one event.
pub fn eval_projection(proj: &TypedProjection, event: &Value) -> NtupleRow {
    proj.eval(event)
}
