//! A small loop-free procedure language with exact relational semantics.
//!
//! ```text
//! body   := ( stmt ";"? )*
//! stmt   := lvalue ":=" expr
//!         | "havoc" lvalue ( "in" expr ".." expr )?
//!         | "if" expr "{" body "}" ( "else" ( "{" body "}" | stmt-if ) )?
//! lvalue := IDENT ( "." IDENT )*
//! ```
//!
//! Expressions are IL expressions in pre-position, read over the current
//! state. Havoc ranges are inclusive.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::il::{pretty_print, pretty_print_in_context, Expr, IlError, SemType, VarContext};

mod exec;
mod parse;
mod sp;

pub use exec::{
    brute_verify, exec_mini, exec_mini_capped, pair_reproducible, BruteResult, Program, StateSet,
    DEFAULT_STATE_CAP,
};
pub use parse::parse_mini;
pub use sp::strongest_post;

/// Largest total domain size (in bits) `brute_verify` will enumerate.
pub const MAX_DOMAIN_BITS: u32 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MiniError {
    #[error(transparent)]
    Il(#[from] IlError),
    #[error("havoc enumeration exceeds the state cap of {cap}")]
    RangeTooLarge { cap: usize },
    #[error("domain too large to enumerate: {reason}")]
    DomainTooLarge { reason: String },
    #[error("`{0}` is not an assignable location")]
    NotAssignable(String),
    #[error("empty havoc range for `{0}`")]
    EmptyRange(String),
}

/// Assignment target `var.f.g`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LValue {
    pub var: String,
    pub path: Vec<String>,
}

impl LValue {
    pub fn sem_type<'a>(&self, ctx: &'a VarContext) -> Result<&'a SemType, MiniError> {
        let mut ty = ctx
            .get(&self.var)
            .ok_or_else(|| IlError::UnknownVariable(self.var.clone()))?;
        for f in &self.path {
            ty = ty
                .field(f)
                .ok_or_else(|| MiniError::NotAssignable(self.to_string()))?;
        }
        Ok(ty)
    }
}

impl fmt::Display for LValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::il::flat::leaf_name(&self.var, &self.path))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    Assign(LValue, Expr),
    Havoc(LValue, Option<(Expr, Expr)>),
    If(Expr, Vec<Stmt>, Vec<Stmt>),
}

/// A parsed mini-language procedure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniProc {
    pub ctx: VarContext,
    pub body: Vec<Stmt>,
}

impl MiniProc {
    /// Variables read by some expression.
    pub fn reads(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn walk(body: &[Stmt], out: &mut BTreeSet<String>) {
            for s in body {
                match s {
                    Stmt::Assign(_, e) => out.extend(e.free_vars().1),
                    Stmt::Havoc(_, range) => {
                        if let Some((lo, hi)) = range {
                            out.extend(lo.free_vars().1);
                            out.extend(hi.free_vars().1);
                        }
                    }
                    Stmt::If(c, t, f) => {
                        out.extend(c.free_vars().1);
                        walk(t, out);
                        walk(f, out);
                    }
                }
            }
        }
        walk(&self.body, &mut out);
        out
    }

    /// Variables assigned or havocked on some path.
    pub fn writes(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn walk(body: &[Stmt], out: &mut BTreeSet<String>) {
            for s in body {
                match s {
                    Stmt::Assign(lv, _) | Stmt::Havoc(lv, _) => {
                        out.insert(lv.var.clone());
                    }
                    Stmt::If(_, t, f) => {
                        walk(t, out);
                        walk(f, out);
                    }
                }
            }
        }
        walk(&self.body, &mut out);
        out
    }

    /// Re-elaborates the procedure over another context (e.g. its
    /// interface), which must declare every variable the body mentions.
    pub fn retarget(&self, ctx: &VarContext) -> Result<MiniProc, MiniError> {
        parse_mini(&self.to_string(), ctx)
    }
}

impl fmt::Display for MiniProc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_body(&self.body))
    }
}

fn print_cond(e: &Expr) -> String {
    match e {
        Expr::Bool(_) | Expr::Var(_) | Expr::Select(..) => pretty_print(e),
        _ => format!("({})", pretty_print(e)),
    }
}

fn print_stmt(s: &Stmt) -> String {
    match s {
        Stmt::Assign(lv, e) => format!("{lv} := {}", pretty_print_in_context(e)),
        Stmt::Havoc(lv, None) => format!("havoc {lv}"),
        Stmt::Havoc(lv, Some((lo, hi))) => {
            format!(
                "havoc {lv} in {}..{}",
                pretty_print_in_context(lo),
                pretty_print_in_context(hi)
            )
        }
        Stmt::If(c, t, f) => {
            let mut out = format!("if {} {{ {} }}", print_cond(c), print_body(t));
            if !f.is_empty() {
                out.push_str(&format!(" else {{ {} }}", print_body(f)));
            }
            out
        }
    }
}

pub fn print_body(body: &[Stmt]) -> String {
    body.iter().map(print_stmt).collect::<Vec<_>>().join("; ")
}
