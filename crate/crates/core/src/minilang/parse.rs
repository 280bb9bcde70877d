use super::{LValue, MiniError, MiniProc, Stmt};
use crate::il::lexer::Tok;
use crate::il::parser::Parser;
use crate::il::{elaborate_raw, IlError, Position, SemType, VarContext};

/// Parses and type-checks a procedure body over `ctx`.
pub fn parse_mini(text: &str, ctx: &VarContext) -> Result<MiniProc, MiniError> {
    let mut p = Parser::new(text)?;
    let body = block(&mut p, ctx, true)?;
    Ok(MiniProc {
        ctx: ctx.clone(),
        body,
    })
}

fn block(p: &mut Parser, ctx: &VarContext, top: bool) -> Result<Vec<Stmt>, MiniError> {
    let mut out = Vec::new();
    loop {
        while p.eat(&Tok::Semi) {}
        match p.peek() {
            Tok::Eof if top => return Ok(out),
            Tok::RBrace if !top => return Ok(out),
            _ => out.push(stmt(p, ctx)?),
        }
    }
}

fn braced(p: &mut Parser, ctx: &VarContext) -> Result<Vec<Stmt>, MiniError> {
    p.expect(&Tok::LBrace, "`{`")?;
    let body = block(p, ctx, false)?;
    p.expect(&Tok::RBrace, "`}`")?;
    Ok(body)
}

fn lvalue(p: &mut Parser, ctx: &VarContext) -> Result<(LValue, SemType), MiniError> {
    let var = p.ident()?;
    let mut path = Vec::new();
    while p.eat(&Tok::Dot) {
        path.push(p.ident()?);
    }
    let lv = LValue { var, path };
    let ty = lv.sem_type(ctx)?.clone();
    Ok((lv, ty))
}

fn stmt(p: &mut Parser, ctx: &VarContext) -> Result<Stmt, MiniError> {
    match p.peek() {
        Tok::If => {
            p.advance();
            let raw = p.expr()?;
            let cond = elaborate_raw(&raw, ctx, Position::Pre, Some(&SemType::Bool))?;
            let then = braced(p, ctx)?;
            let els = if p.eat(&Tok::Else) {
                if matches!(p.peek(), Tok::If) {
                    vec![stmt(p, ctx)?]
                } else {
                    braced(p, ctx)?
                }
            } else {
                Vec::new()
            };
            Ok(Stmt::If(cond, then, els))
        }
        Tok::Havoc => {
            p.advance();
            let (lv, ty) = lvalue(p, ctx)?;
            let range = if p.eat(&Tok::In) {
                if !ty.is_int() {
                    return Err(p.error(format!("havoc range on non-integer `{lv}`")).into());
                }
                let lo = p.expr()?;
                p.expect(&Tok::DotDot, "`..`")?;
                let hi = p.expr()?;
                let lo = constant(elaborate_raw(&lo, ctx, Position::Pre, Some(&ty))?)?;
                let hi = constant(elaborate_raw(&hi, ctx, Position::Pre, Some(&ty))?)?;
                Some((lo, hi))
            } else {
                None
            };
            Ok(Stmt::Havoc(lv, range))
        }
        Tok::Ident(_) => {
            let (lv, ty) = lvalue(p, ctx)?;
            p.expect(&Tok::Assign, "`:=`")?;
            let raw = p.expr()?;
            let rhs = elaborate_raw(&raw, ctx, Position::Pre, Some(&ty))?;
            Ok(Stmt::Assign(lv, rhs))
        }
        other => Err(p
            .error(format!("expected a statement, found {other}"))
            .into()),
    }
}

fn constant(e: crate::il::Expr) -> Result<crate::il::Expr, IlError> {
    match e {
        crate::il::Expr::Int { .. } => Ok(e),
        other => Err(IlError::Type {
            subterm: other.to_string(),
            expected: "integer literal".into(),
            found: "expression".into(),
        }),
    }
}
