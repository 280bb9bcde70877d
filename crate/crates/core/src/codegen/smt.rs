//! SMT-LIB v2 backend over fixed-size bitvectors and Booleans. Record
//! leaves become separate constants named `target.field`.

use std::collections::BTreeMap;

use super::{prepare, scalar_type, CodegenError, NameMap};
use crate::il::flat::scalarize;
use crate::il::{BinOp, Expr, SemType, Sign, VarContext};

/// Sort of a scalar type.
pub fn smt_sort(ty: &SemType) -> String {
    match ty {
        SemType::Bool => "Bool".into(),
        SemType::UInt(w) | SemType::SInt(w) => format!("(_ BitVec {w})"),
        SemType::Record(_) => panic!("records have no SMT sort"),
    }
}

/// Literal of a scalar type from raw bits.
pub fn smt_literal(ty: &SemType, bits: u64) -> String {
    match ty {
        SemType::Bool => if bits & 1 == 1 { "true" } else { "false" }.into(),
        SemType::UInt(w) | SemType::SInt(w) => format!("(_ bv{bits} {w})"),
        SemType::Record(_) => panic!("records have no SMT literal"),
    }
}

/// Quotes a symbol when it is not a legal simple symbol.
pub fn smt_symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

/// Compiles a well-typed expression into an SMT-LIB term.
pub fn compile_to_smt(e: &Expr, m: &NameMap) -> Result<String, CodegenError> {
    let e = prepare(e, m)?;
    let leaves = super::leaf_types(m.ctx());
    term(&e, &leaves, &|leaf: &str, old: bool| {
        let (target, path) = m.resolve(leaf, old)?;
        let mut s = target.name.clone();
        for f in path {
            s.push('.');
            s.push_str(f);
        }
        Ok(smt_symbol(&s))
    })
}

/// Compiles with a caller-chosen leaf naming; `name(leaf, is_old)` returns
/// the symbol text, or `None` when the leaf is unmapped.
pub fn compile_to_smt_with(
    e: &Expr,
    ctx: &VarContext,
    name: &dyn Fn(&str, bool) -> Option<String>,
) -> Result<String, CodegenError> {
    let e = scalarize(e, ctx)?;
    let leaves = super::leaf_types(ctx);
    term(&e, &leaves, &|leaf: &str, old: bool| {
        name(leaf, old).ok_or_else(|| CodegenError::UnmappedVariable {
            var: leaf.to_string(),
            old,
        })
    })
}

type Namer<'a> = dyn Fn(&str, bool) -> Result<String, CodegenError> + 'a;

fn term(
    e: &Expr,
    leaves: &BTreeMap<String, SemType>,
    name: &Namer<'_>,
) -> Result<String, CodegenError> {
    let go = |x: &Expr| term(x, leaves, name);
    Ok(match e {
        Expr::Bool(b) => b.to_string(),
        Expr::Int { bits, .. } => smt_literal(&scalar_type(e, leaves), *bits),
        Expr::Var(n) => name(n, false)?,
        Expr::Old(n) => name(n, true)?,
        Expr::Select(..) => unreachable!("scalarized"),
        Expr::Not(a) => format!("(not {})", go(a)?),
        Expr::Ite(c, t, f) => format!("(ite {} {} {})", go(c)?, go(t)?, go(f)?),
        Expr::Bin(op, a, b) => {
            let (x, y) = (go(a)?, go(b)?);
            let head = match op {
                BinOp::And => "and",
                BinOp::Or => "or",
                BinOp::Implies => "=>",
                BinOp::Eq => "=",
                BinOp::Neq => return Ok(format!("(not (= {x} {y}))")),
                BinOp::Add => "bvadd",
                BinOp::Sub => "bvsub",
                BinOp::Mul => "bvmul",
                BinOp::Lt(Sign::Unsigned) => "bvult",
                BinOp::Le(Sign::Unsigned) => "bvule",
                BinOp::Gt(Sign::Unsigned) => "bvugt",
                BinOp::Ge(Sign::Unsigned) => "bvuge",
                BinOp::Lt(Sign::Signed) => "bvslt",
                BinOp::Le(Sign::Signed) => "bvsle",
                BinOp::Gt(Sign::Signed) => "bvsgt",
                BinOp::Ge(Sign::Signed) => "bvsge",
            };
            format!("({head} {x} {y})")
        }
    })
}
