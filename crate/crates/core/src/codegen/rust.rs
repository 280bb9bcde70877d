//! Rust backend. Values keep their native machine type; arithmetic uses the
//! `wrapping_*` methods so debug-build overflow checks never fire, and odd
//! widths are renormalized after every operation.

use std::collections::BTreeMap;

use super::{machine_width, prepare, scalar_type, CodegenError, NameMap};
use crate::il::{mask, to_signed, BinOp, Expr, SemType};
use crate::model::Access;

/// Native Rust type used to store a scalar of type `ty`.
pub fn rust_scalar_type(ty: &SemType) -> String {
    match ty {
        SemType::Bool => "bool".into(),
        SemType::UInt(w) => format!("u{}", machine_width(*w)),
        SemType::SInt(w) => format!("i{}", machine_width(*w)),
        SemType::Record(_) => panic!("record has no scalar Rust type"),
    }
}

/// Compiles a well-typed expression into a Rust expression.
pub fn compile_to_rust(e: &Expr, m: &NameMap) -> Result<String, CodegenError> {
    let e = prepare(e, m)?;
    let leaves = super::leaf_types(m.ctx());
    Ctx { m, leaves: &leaves }.expr(&e)
}

pub(crate) fn literal(ty: &SemType, bits: u64) -> String {
    match ty {
        SemType::Bool => (bits & 1 == 1).to_string(),
        SemType::UInt(_) => format!("{bits}{}", rust_scalar_type(ty)),
        SemType::SInt(w) => {
            let v = to_signed(bits, *w);
            if v < 0 {
                format!("({v}{})", rust_scalar_type(ty))
            } else {
                format!("{v}{}", rust_scalar_type(ty))
            }
        }
        SemType::Record(_) => panic!("no record literals"),
    }
}

struct Ctx<'a> {
    m: &'a NameMap,
    leaves: &'a BTreeMap<String, SemType>,
}

impl Ctx<'_> {
    fn leaf(&self, name: &str, old: bool) -> Result<String, CodegenError> {
        let (target, path) = self.m.resolve(name, old)?;
        let fields: String = path.iter().map(|f| format!(".{f}")).collect();
        Ok(match (target.access, path.is_empty()) {
            (Access::Direct, _) | (Access::Pointer, false) => format!("{}{fields}", target.name),
            (Access::Pointer, true) => format!("(*{})", target.name),
            (Access::Port, true) => format!("{}.value", target.name),
            (Access::Port, false) => {
                return Err(CodegenError::UnsupportedAccess {
                    var: name.split('.').next().unwrap_or(name).to_string(),
                    reason: "port access needs a scalar variable".into(),
                })
            }
        })
    }

    fn expr(&self, e: &Expr) -> Result<String, CodegenError> {
        Ok(match e {
            Expr::Bool(b) => b.to_string(),
            Expr::Int { bits, .. } => literal(&scalar_type(e, self.leaves), *bits),
            Expr::Var(n) => self.leaf(n, false)?,
            Expr::Old(n) => self.leaf(n, true)?,
            Expr::Select(..) => unreachable!("scalarized"),
            Expr::Not(a) => format!("(!{})", self.expr(a)?),
            Expr::Ite(c, t, f) => {
                format!(
                    "(if {} {{ {} }} else {{ {} }})",
                    self.expr(c)?,
                    self.expr(t)?,
                    self.expr(f)?
                )
            }
            Expr::Bin(op, a, b) => {
                let (x, y) = (self.expr(a)?, self.expr(b)?);
                match op {
                    BinOp::And => format!("({x} && {y})"),
                    BinOp::Or => format!("({x} || {y})"),
                    BinOp::Implies => format!("(!{x} || {y})"),
                    BinOp::Add | BinOp::Sub | BinOp::Mul => {
                        let ty = scalar_type(a, self.leaves);
                        let method = match op {
                            BinOp::Add => "wrapping_add",
                            BinOp::Sub => "wrapping_sub",
                            _ => "wrapping_mul",
                        };
                        let raw = format!("{x}.{method}({y})");
                        let w = ty.width().expect("integer operands");
                        let mw = machine_width(w);
                        if w == mw {
                            raw
                        } else if ty.is_signed() {
                            let k = mw - w;
                            format!("(({raw} << {k}) >> {k})")
                        } else {
                            format!("({raw} & {})", literal(&ty, mask(w)))
                        }
                    }
                    _ => {
                        let sym = op.symbol();
                        let sym = sym.trim_end_matches(['u', 's']);
                        format!("({x} {sym} {y})")
                    }
                }
            }
        })
    }
}
