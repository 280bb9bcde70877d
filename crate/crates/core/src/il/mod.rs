//! The intermediate contract language: typed AST, concrete syntax, type
//! checker and reference interpreter.
//!
//! Grammar (see `docs/il-grammar.md` for the full EBNF):
//!
//! ```text
//! expr    := implies
//! implies := or ( "==>" implies )?
//! or      := and ( "||" and )*
//! and     := cmp ( "&&" cmp )*
//! cmp     := sum ( cmpop sum )?
//! sum     := prod ( ("+" | "-") prod )*
//! prod    := unary ( "*" unary )*
//! unary   := "!" unary | "-" INT | postfix
//! postfix := primary ( "." IDENT )*
//! primary := INT | "true" | "false" | IDENT | "old" "(" IDENT ")"
//!          | "(" expr ")" | "if" expr "then" expr "else" expr
//! ```

use std::collections::BTreeSet;

use thiserror::Error;

mod eval;
mod expr;
pub mod flat;
pub(crate) mod lexer;
pub(crate) mod parser;
mod print;
mod typeck;
mod types;

pub use eval::{apply_binop, eval, eval_bool};
pub use expr::{BinOp, Contract, Expr, Position, Sign};
pub use lexer::Loc;
pub use print::pretty_print;
pub(crate) use print::pretty_print_in_context;
pub use typeck::typecheck;
pub use types::{Assignment, SemType, Value, VarContext, MAX_WIDTH};

pub(crate) use types::{is_identifier, mask, to_signed};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IlError {
    #[error("syntax error at {loc}: {message}")]
    Syntax { loc: Loc, message: String },
    #[error("type error in `{subterm}`: expected {expected}, found {found}")]
    Type {
        subterm: String,
        expected: String,
        found: String,
    },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("old(..) is not allowed in a precondition or guard")]
    OldInPrecondition,
    #[error("expression reads the pre-state through old(..) but no post-state was supplied")]
    MissingPostState,
    #[error("invalid type: {0}")]
    InvalidType(String),
    #[error("assignment does not conform: {0}")]
    NonConforming(String),
}

/// Parses and type-checks an expression.
pub fn parse_expr(text: &str, ctx: &VarContext, pos: Position) -> Result<Expr, IlError> {
    let mut p = parser::Parser::new(text)?;
    let raw = p.expr()?;
    if !p.at_eof() {
        return Err(p.error(format!("unexpected {} after expression", p.peek())));
    }
    let (e, _) = typeck::elaborate(&raw, ctx, pos, None)?;
    Ok(e)
}

/// Parses a predicate, requiring Bool type.
pub fn parse_predicate(text: &str, ctx: &VarContext, pos: Position) -> Result<Expr, IlError> {
    let e = parse_expr(text, ctx, pos)?;
    expect_bool(&e, ctx, pos)?;
    Ok(e)
}

/// Elaborates an already-parsed term, optionally against an expected type.
pub(crate) fn elaborate_raw(
    raw: &parser::Raw,
    ctx: &VarContext,
    pos: Position,
    expected: Option<&SemType>,
) -> Result<Expr, IlError> {
    typeck::elaborate(raw, ctx, pos, expected).map(|(e, _)| e)
}

pub(crate) fn expect_bool(e: &Expr, ctx: &VarContext, pos: Position) -> Result<(), IlError> {
    let ty = typecheck(e, ctx, pos)?;
    if ty != SemType::Bool {
        return Err(IlError::Type {
            subterm: e.to_string(),
            expected: "bool".into(),
            found: ty.to_string(),
        });
    }
    Ok(())
}

/// `(names read through old(..), names read as current state)`.
pub fn free_vars(e: &Expr) -> (BTreeSet<String>, BTreeSet<String>) {
    e.free_vars()
}

/// Parses the two-line contract text form:
///
/// ```text
/// requires <pre>
/// ensures <post>
/// ```
///
/// Either clause may be omitted and defaults to `true`.
pub fn parse_contract(text: &str, ctx: &VarContext) -> Result<Contract, IlError> {
    // clauses[0] = requires, clauses[1] = ensures
    let mut clauses: [Option<String>; 2] = [None, None];
    let mut current: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("//") {
            continue;
        }
        let (idx, rest) = if let Some(rest) = trimmed.strip_prefix("requires") {
            (0, rest)
        } else if let Some(rest) = trimmed.strip_prefix("ensures") {
            (1, rest)
        } else if let Some(idx) = current {
            (idx, trimmed)
        } else {
            return Err(IlError::Syntax {
                loc: Loc {
                    line: lineno + 1,
                    col: 1,
                },
                message: "expected `requires` or `ensures`".into(),
            });
        };
        let slot = clauses[idx].get_or_insert_with(String::new);
        slot.push(' ');
        slot.push_str(rest);
        current = Some(idx);
    }
    let [pre, post] = clauses;
    let pre = match pre {
        Some(t) => parse_predicate(&t, ctx, Position::Pre)?,
        None => Expr::tt(),
    };
    let post = match post {
        Some(t) => parse_predicate(&t, ctx, Position::Post)?,
        None => Expr::tt(),
    };
    Ok(Contract { pre, post })
}
