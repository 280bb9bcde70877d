//! C backend. Integer subterms are evaluated as `uint32_t` (widths up to
//! 32) or `uint64_t` bit patterns, masked to the IL width after every
//! arithmetic operation. Signed orderings flip the sign bit and compare
//! unsigned, which avoids implementation-defined conversions.

use std::collections::BTreeMap;

use super::{machine_width, prepare, scalar_type, CodegenError, NameMap};
use crate::il::{mask, BinOp, Expr, SemType, Sign};
use crate::model::Access;

/// Exact-width C type used to store a scalar of type `ty`.
pub fn c_scalar_type(ty: &SemType) -> String {
    match ty {
        SemType::Bool => "bool".into(),
        SemType::UInt(w) => format!("uint{}_t", machine_width(*w)),
        SemType::SInt(w) => format!("int{}_t", machine_width(*w)),
        SemType::Record(_) => panic!("record has no scalar C type"),
    }
}

/// Compiles a well-typed expression into a side-effect-free C expression.
pub fn compile_to_c(e: &Expr, m: &NameMap) -> Result<String, CodegenError> {
    let e = prepare(e, m)?;
    let leaves = super::leaf_types(m.ctx());
    Ctx { m, leaves: &leaves }.expr(&e)
}

/// Lvalue text of a leaf given its target.
pub(crate) fn c_lvalue(
    name: &str,
    access: Access,
    path: &[&str],
    var: &str,
) -> Result<String, CodegenError> {
    let fields: String = path.iter().map(|f| format!(".{f}")).collect();
    Ok(match (access, path.split_first()) {
        (Access::Direct, _) => format!("{name}{fields}"),
        (Access::Pointer, None) => format!("(*{name})"),
        (Access::Pointer, Some((first, rest))) => {
            let rest: String = rest.iter().map(|f| format!(".{f}")).collect();
            format!("{name}->{first}{rest}")
        }
        (Access::Port, None) => format!("{name}->value"),
        (Access::Port, Some(_)) => {
            return Err(CodegenError::UnsupportedAccess {
                var: var.to_string(),
                reason: "port access needs a scalar variable".into(),
            })
        }
    })
}

fn container(w: u32) -> (&'static str, &'static str, u32) {
    if w <= 32 {
        ("uint32_t", "U", 32)
    } else {
        ("uint64_t", "ULL", 64)
    }
}

fn lit(v: u64, w: u32) -> String {
    let (_, suffix, _) = container(w);
    format!("{v}{suffix}")
}

fn hex(v: u64, w: u32) -> String {
    let (_, suffix, _) = container(w);
    format!("{v:#x}{suffix}")
}

struct Ctx<'a> {
    m: &'a NameMap,
    leaves: &'a BTreeMap<String, SemType>,
}

impl Ctx<'_> {
    fn leaf(&self, name: &str, old: bool) -> Result<String, CodegenError> {
        let (target, path) = self.m.resolve(name, old)?;
        let var = name.split('.').next().unwrap_or(name);
        let lv = c_lvalue(&target.name, target.access, &path, var)?;
        let ty = self.leaves.get(name).cloned().unwrap_or(SemType::Bool);
        Ok(match ty {
            SemType::Bool => lv,
            SemType::UInt(w) if w == 32 || w == 64 => lv,
            SemType::UInt(w) => format!("(({})({lv}))", container(w).0),
            SemType::SInt(w) => {
                let (cty, _, cw) = container(w);
                if w == cw {
                    format!("(({cty})({lv}))")
                } else {
                    format!("((({cty})({lv})) & {})", hex(mask(w), w))
                }
            }
            SemType::Record(_) => unreachable!("scalarized"),
        })
    }

    fn expr(&self, e: &Expr) -> Result<String, CodegenError> {
        Ok(match e {
            Expr::Bool(b) => if *b { "1" } else { "0" }.to_string(),
            Expr::Int { bits, width, .. } => lit(*bits, *width),
            Expr::Var(n) => self.leaf(n, false)?,
            Expr::Old(n) => self.leaf(n, true)?,
            Expr::Select(..) => unreachable!("scalarized"),
            Expr::Not(a) => format!("(!{})", self.expr(a)?),
            Expr::Ite(c, t, f) => format!(
                "({} ? {} : {})",
                self.expr(c)?,
                self.expr(t)?,
                self.expr(f)?
            ),
            Expr::Bin(op, a, b) => {
                let (x, y) = (self.expr(a)?, self.expr(b)?);
                let ty = scalar_type(a, self.leaves);
                match op {
                    BinOp::And => format!("({x} && {y})"),
                    BinOp::Or => format!("({x} || {y})"),
                    BinOp::Implies => format!("(!{x} || {y})"),
                    BinOp::Eq => format!("({x} == {y})"),
                    BinOp::Neq => format!("({x} != {y})"),
                    BinOp::Add | BinOp::Sub | BinOp::Mul => {
                        let w = ty.width().expect("integer operands");
                        let sym = op.symbol();
                        if w == container(w).2 {
                            format!("({x} {sym} {y})")
                        } else {
                            format!("(({x} {sym} {y}) & {})", hex(mask(w), w))
                        }
                    }
                    _ => {
                        let w = ty.width().expect("integer operands");
                        let sym = op.symbol();
                        let sym = sym.trim_end_matches(['u', 's']);
                        if op.sign() == Some(Sign::Signed) {
                            let sb = hex(1u64 << (w - 1), w);
                            format!("(({x} ^ {sb}) {sym} ({y} ^ {sb}))")
                        } else {
                            format!("({x} {sym} {y})")
                        }
                    }
                }
            }
        })
    }
}
