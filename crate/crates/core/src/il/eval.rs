//! Reference interpreter: the denotation every backend must agree with.

use super::expr::{BinOp, Expr, Sign};
use super::types::{mask, to_signed, Assignment, Value};
use super::IlError;

/// Evaluates `e`. With `post` absent the expression is read in pre-position:
/// variables come from `pre` and `old(..)` is an error. With `post` present,
/// variables come from `post` and `old(..)` from `pre`.
pub fn eval(e: &Expr, pre: &Assignment, post: Option<&Assignment>) -> Result<Value, IlError> {
    match e {
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Int {
            bits,
            signed,
            width,
        } => Ok(Value::Int {
            bits: *bits,
            signed: *signed,
            width: *width,
        }),
        Expr::Var(n) => {
            let state = post.unwrap_or(pre);
            state
                .get(n)
                .cloned()
                .ok_or_else(|| IlError::UnknownVariable(n.clone()))
        }
        Expr::Old(n) => {
            if post.is_none() {
                return Err(IlError::MissingPostState);
            }
            pre.get(n)
                .cloned()
                .ok_or_else(|| IlError::UnknownVariable(n.clone()))
        }
        Expr::Select(inner, field) => {
            let v = eval(inner, pre, post)?;
            v.field(field).cloned().ok_or_else(|| IlError::Type {
                subterm: e.to_string(),
                expected: format!("record with field `{field}`"),
                found: v.sem_type().to_string(),
            })
        }
        Expr::Not(inner) => Ok(Value::Bool(!as_bool(&eval(inner, pre, post)?, inner)?)),
        Expr::Bin(op, a, b) => {
            let va = eval(a, pre, post)?;
            match op {
                BinOp::And => Ok(Value::Bool(
                    as_bool(&va, a)? && as_bool(&eval(b, pre, post)?, b)?,
                )),
                BinOp::Or => Ok(Value::Bool(
                    as_bool(&va, a)? || as_bool(&eval(b, pre, post)?, b)?,
                )),
                BinOp::Implies => Ok(Value::Bool(
                    !as_bool(&va, a)? || as_bool(&eval(b, pre, post)?, b)?,
                )),
                _ => {
                    let vb = eval(b, pre, post)?;
                    apply_binop(*op, &va, &vb).ok_or_else(|| IlError::Type {
                        subterm: e.to_string(),
                        expected: "operands of identical type".into(),
                        found: format!("{} and {}", va.sem_type(), vb.sem_type()),
                    })
                }
            }
        }
        Expr::Ite(c, t, f) => {
            if as_bool(&eval(c, pre, post)?, c)? {
                eval(t, pre, post)
            } else {
                eval(f, pre, post)
            }
        }
    }
}

fn as_bool(v: &Value, e: &Expr) -> Result<bool, IlError> {
    v.as_bool().ok_or_else(|| IlError::Type {
        subterm: e.to_string(),
        expected: "bool".into(),
        found: v.sem_type().to_string(),
    })
}

/// Applies a non-logical binary operator; `None` on ill-typed operands.
pub fn apply_binop(op: BinOp, a: &Value, b: &Value) -> Option<Value> {
    if a.sem_type() != b.sem_type() {
        return None;
    }
    match op {
        BinOp::Eq => Some(Value::Bool(a == b)),
        BinOp::Neq => Some(Value::Bool(a != b)),
        _ => {
            let (
                Value::Int {
                    bits: x,
                    signed,
                    width,
                },
                Value::Int { bits: y, .. },
            ) = (a, b)
            else {
                return None;
            };
            let (x, y, w) = (*x, *y, *width);
            let ord = |s: Sign| match s {
                Sign::Unsigned => x.cmp(&y),
                Sign::Signed => to_signed(x, w).cmp(&to_signed(y, w)),
            };
            let int = |bits: u64| Value::Int {
                bits: bits & mask(w),
                signed: *signed,
                width: w,
            };
            Some(match op {
                BinOp::Lt(s) => Value::Bool(ord(s).is_lt()),
                BinOp::Le(s) => Value::Bool(ord(s).is_le()),
                BinOp::Gt(s) => Value::Bool(ord(s).is_gt()),
                BinOp::Ge(s) => Value::Bool(ord(s).is_ge()),
                BinOp::Add => int(x.wrapping_add(y)),
                BinOp::Sub => int(x.wrapping_sub(y)),
                BinOp::Mul => int(x.wrapping_mul(y)),
                _ => return None,
            })
        }
    }
}

/// Evaluates a Boolean predicate.
pub fn eval_bool(e: &Expr, pre: &Assignment, post: Option<&Assignment>) -> Result<bool, IlError> {
    as_bool(&eval(e, pre, post)?, e)
}
