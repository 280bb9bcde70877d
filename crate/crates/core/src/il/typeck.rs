use super::expr::{BinOp, Expr, Position, Sign};
use super::lexer::CmpTok;
use super::parser::{Raw, RawOp};
use super::types::{mask, SemType, VarContext};
use super::IlError;

fn type_error(subterm: impl ToString, expected: impl ToString, found: impl ToString) -> IlError {
    IlError::Type {
        subterm: subterm.to_string(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

fn lookup<'a>(ctx: &'a VarContext, name: &str) -> Result<&'a SemType, IlError> {
    ctx.get(name)
        .ok_or_else(|| IlError::UnknownVariable(name.to_string()))
}

/// Returns the unique type of a typed expression.
pub fn typecheck(e: &Expr, ctx: &VarContext, pos: Position) -> Result<SemType, IlError> {
    match e {
        Expr::Bool(_) => Ok(SemType::Bool),
        Expr::Int {
            bits,
            signed,
            width,
        } => {
            let ty = if *signed {
                SemType::SInt(*width)
            } else {
                SemType::UInt(*width)
            };
            ty.validate()?;
            if bits & !mask(*width) != 0 {
                return Err(type_error(e, ty, "literal wider than its type"));
            }
            Ok(ty)
        }
        Expr::Var(n) => lookup(ctx, n).cloned(),
        Expr::Old(n) => {
            if pos == Position::Pre {
                return Err(IlError::OldInPrecondition);
            }
            lookup(ctx, n).cloned()
        }
        Expr::Select(inner, field) => {
            let ty = typecheck(inner, ctx, pos)?;
            match ty.field(field) {
                Some(ft) => Ok(ft.clone()),
                None => Err(type_error(e, format!("record with field `{field}`"), ty)),
            }
        }
        Expr::Not(inner) => {
            expect(inner, ctx, pos, &SemType::Bool)?;
            Ok(SemType::Bool)
        }
        Expr::Bin(op, a, b) => {
            let ta = typecheck(a, ctx, pos)?;
            let tb = typecheck(b, ctx, pos)?;
            binop_result(e, *op, &ta, &tb)
        }
        Expr::Ite(c, t, f) => {
            expect(c, ctx, pos, &SemType::Bool)?;
            let tt = typecheck(t, ctx, pos)?;
            let tf = typecheck(f, ctx, pos)?;
            if tt != tf {
                return Err(type_error(f, &tt, &tf));
            }
            Ok(tt)
        }
    }
}

fn expect(e: &Expr, ctx: &VarContext, pos: Position, want: &SemType) -> Result<(), IlError> {
    let got = typecheck(e, ctx, pos)?;
    if &got != want {
        return Err(type_error(e, want, got));
    }
    Ok(())
}

fn binop_result(whole: &Expr, op: BinOp, ta: &SemType, tb: &SemType) -> Result<SemType, IlError> {
    if op.is_logical() {
        if ta != &SemType::Bool {
            return Err(type_error(whole, SemType::Bool, ta));
        }
        if tb != &SemType::Bool {
            return Err(type_error(whole, SemType::Bool, tb));
        }
        return Ok(SemType::Bool);
    }
    if ta != tb {
        return Err(type_error(whole, ta, tb));
    }
    match op {
        BinOp::Eq | BinOp::Neq => Ok(SemType::Bool),
        _ if op.is_ordering() => {
            if !ta.is_int() {
                return Err(type_error(whole, "integer operands", ta));
            }
            let want_signed = op.sign() == Some(Sign::Signed);
            if ta.is_signed() != want_signed {
                return Err(type_error(
                    whole,
                    format!(
                        "{} operands (signedness mismatch)",
                        if want_signed { "signed" } else { "unsigned" }
                    ),
                    ta,
                ));
            }
            Ok(SemType::Bool)
        }
        _ => {
            if !ta.is_int() {
                return Err(type_error(whole, "integer operands", ta));
            }
            Ok(ta.clone())
        }
    }
}

/// Elaborates a parsed tree into a typed expression.
pub(crate) fn elaborate(
    raw: &Raw,
    ctx: &VarContext,
    pos: Position,
    expected: Option<&SemType>,
) -> Result<(Expr, SemType), IlError> {
    let (e, ty) = elab(raw, ctx, pos, expected)?;
    if let Some(want) = expected {
        if &ty != want {
            return Err(type_error(&e, want, &ty));
        }
    }
    Ok((e, ty))
}

fn literal(value: u64, negative: bool, ty: &SemType) -> Result<Expr, IlError> {
    let shown = if negative {
        format!("-{value}")
    } else {
        value.to_string()
    };
    match ty {
        SemType::UInt(w) => {
            if negative && value != 0 {
                return Err(type_error(shown, ty, "negative literal"));
            }
            if value & !mask(*w) != 0 {
                return Err(type_error(shown, ty, "literal out of range"));
            }
            Ok(Expr::uint(value, *w))
        }
        SemType::SInt(w) => {
            let limit = 1u128 << (w - 1);
            let ok = if negative {
                (value as u128) <= limit
            } else {
                (value as u128) < limit
            };
            if !ok {
                return Err(type_error(shown, ty, "literal out of range"));
            }
            let v = if negative {
                (value as i64).wrapping_neg()
            } else {
                value as i64
            };
            Ok(Expr::sint(v, *w))
        }
        other => Err(type_error(shown, other, "integer literal")),
    }
}

fn elab(
    raw: &Raw,
    ctx: &VarContext,
    pos: Position,
    expected: Option<&SemType>,
) -> Result<(Expr, SemType), IlError> {
    match raw {
        Raw::Bool(b) => Ok((Expr::Bool(*b), SemType::Bool)),
        Raw::Int {
            value,
            negative,
            suffix,
            loc,
        } => {
            let ty = match (suffix, expected) {
                (Some((signed, w)), _) => {
                    if *signed {
                        SemType::SInt(*w)
                    } else {
                        SemType::UInt(*w)
                    }
                }
                (None, Some(t)) if t.is_int() => t.clone(),
                (None, Some(t)) => return Err(type_error(value, t, "integer literal")),
                (None, None) => {
                    return Err(IlError::Syntax {
                        loc: *loc,
                        message: format!("cannot infer the type of literal `{value}`; add a suffix like `{value}u32`"),
                    })
                }
            };
            Ok((literal(*value, *negative, &ty)?, ty))
        }
        Raw::Var(n) => Ok((Expr::Var(n.clone()), lookup(ctx, n)?.clone())),
        Raw::Old(n) => {
            if pos == Position::Pre {
                return Err(IlError::OldInPrecondition);
            }
            Ok((Expr::Old(n.clone()), lookup(ctx, n)?.clone()))
        }
        Raw::Select(inner, field) => {
            let (e, ty) = elab(inner, ctx, pos, None)?;
            let whole = Expr::Select(Box::new(e), field.clone());
            match ty.field(field) {
                Some(ft) => Ok((whole, ft.clone())),
                None => Err(type_error(
                    &whole,
                    format!("record with field `{field}`"),
                    ty,
                )),
            }
        }
        Raw::Not(inner) => {
            let (e, _) = elaborate(inner, ctx, pos, Some(&SemType::Bool))?;
            Ok((Expr::not(e), SemType::Bool))
        }
        Raw::Bin(RawOp::Logic(op), a, b, _) => {
            let (ea, _) = elaborate(a, ctx, pos, Some(&SemType::Bool))?;
            let (eb, _) = elaborate(b, ctx, pos, Some(&SemType::Bool))?;
            Ok((Expr::bin(*op, ea, eb), SemType::Bool))
        }
        Raw::Bin(op, a, b, loc) => {
            let hint = match op {
                RawOp::Arith(_) => expected.filter(|t| t.is_int()),
                _ => None,
            };
            let (ea, ta, eb, tb) = same_type_pair(a, b, ctx, pos, hint, *loc)?;
            if ta != tb {
                return Err(type_error(format!("{ea} ... {eb}"), &ta, &tb));
            }
            let bin_op = match op {
                RawOp::Eq => BinOp::Eq,
                RawOp::Neq => BinOp::Neq,
                RawOp::Arith(o) => *o,
                RawOp::Cmp(kind, sign) => {
                    let sign = sign.unwrap_or(if ta.is_signed() {
                        Sign::Signed
                    } else {
                        Sign::Unsigned
                    });
                    match kind {
                        CmpTok::Lt => BinOp::Lt(sign),
                        CmpTok::Le => BinOp::Le(sign),
                        CmpTok::Gt => BinOp::Gt(sign),
                        CmpTok::Ge => BinOp::Ge(sign),
                    }
                }
                RawOp::Logic(_) => unreachable!(),
            };
            let e = Expr::bin(bin_op, ea, eb);
            let ty = binop_result(&e, bin_op, &ta, &tb)?;
            Ok((e, ty))
        }
        Raw::Ite(c, t, f) => {
            let (ec, _) = elaborate(c, ctx, pos, Some(&SemType::Bool))?;
            let (et, tt, ef, tf) = same_type_pair(t, f, ctx, pos, expected, Default::default())?;
            if tt != tf {
                return Err(type_error(&ef, &tt, &tf));
            }
            Ok((Expr::ite(ec, et, ef), tt))
        }
    }
}

type Pair = (Expr, SemType, Expr, SemType);

fn same_type_pair(
    a: &Raw,
    b: &Raw,
    ctx: &VarContext,
    pos: Position,
    hint: Option<&SemType>,
    loc: super::lexer::Loc,
) -> Result<Pair, IlError> {
    if let Some(h) = hint {
        let (ea, ta) = elab(a, ctx, pos, Some(h))?;
        let (eb, tb) = elab(b, ctx, pos, Some(h))?;
        return Ok((ea, ta, eb, tb));
    }
    if a.synthesizable() {
        let (ea, ta) = elab(a, ctx, pos, None)?;
        let (eb, tb) = elab(b, ctx, pos, Some(&ta))?;
        Ok((ea, ta, eb, tb))
    } else if b.synthesizable() {
        let (eb, tb) = elab(b, ctx, pos, None)?;
        let (ea, ta) = elab(a, ctx, pos, Some(&tb))?;
        Ok((ea, ta, eb, tb))
    } else {
        Err(IlError::Syntax {
            loc,
            message: "cannot infer operand types; give one literal a suffix like `3u32`".into(),
        })
    }
}
