//! Compilation of IL predicates into C, Rust and SMT-LIB, and emission of
//! whole-file harnesses for external verifiers.
//!
//! All three backends first [`scalarize`] the expression, so record
//! equality becomes a field-wise conjunction and every variable reference
//! is a scalar leaf `var.f.g`. The [`NameMap`] then decides how a leaf is
//! spelled in the target language.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::il::flat::{scalarize, Layout};
use crate::il::{BinOp, Expr, IlError, SemType, VarContext};
use crate::model::Access;

mod c;
mod harness;
mod rust;
mod smt;

pub use c::{c_scalar_type, compile_to_c};
pub use harness::{emit_cbmc_harness, emit_kani_harness, HarnessSpec, HarnessVar, Role};
pub use rust::{compile_to_rust, rust_scalar_type};
pub use smt::{compile_to_smt, compile_to_smt_with, smt_literal, smt_sort, smt_symbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodegenError {
    #[error("no target name for {}`{var}`", if *.old { "old " } else { "" })]
    UnmappedVariable { var: String, old: bool },
    #[error("contract mentions `{0}`, which the harness does not declare")]
    ContractVariableUnmapped(String),
    #[error("target name `{0}` is used for two variables")]
    NonInjective(String),
    #[error("variable `{var}`: {reason}")]
    UnsupportedAccess { var: String, reason: String },
    #[error("harness has no entry point")]
    MissingEntry,
    #[error(transparent)]
    Il(#[from] IlError),
}

/// Where a variable lives in the target program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub name: String,
    pub access: Access,
}

/// Maps IL variables to target-language names, separately for the
/// current (post) state and for `old(..)` references.
#[derive(Debug, Clone)]
pub struct NameMap {
    ctx: VarContext,
    pre: BTreeMap<String, Target>,
    post: BTreeMap<String, Target>,
}

impl NameMap {
    /// An empty map over `ctx`.
    pub fn new(ctx: &VarContext) -> NameMap {
        NameMap {
            ctx: ctx.clone(),
            pre: BTreeMap::new(),
            post: BTreeMap::new(),
        }
    }

    /// `v` for the current state and `old_v` for the pre-state, both direct.
    pub fn identity(ctx: &VarContext) -> NameMap {
        let mut m = NameMap::new(ctx);
        for name in ctx.names() {
            m = m.with_post(name, name, Access::Direct).with_pre(
                name,
                &format!("old_{name}"),
                Access::Direct,
            );
        }
        m
    }

    pub fn with_post(mut self, var: &str, target: &str, access: Access) -> NameMap {
        self.post.insert(
            var.to_string(),
            Target {
                name: target.to_string(),
                access,
            },
        );
        self
    }

    pub fn with_pre(mut self, var: &str, target: &str, access: Access) -> NameMap {
        self.pre.insert(
            var.to_string(),
            Target {
                name: target.to_string(),
                access,
            },
        );
        self
    }

    pub fn ctx(&self) -> &VarContext {
        &self.ctx
    }

    pub fn post(&self, var: &str) -> Option<&Target> {
        self.post.get(var)
    }

    pub fn pre(&self, var: &str) -> Option<&Target> {
        self.pre.get(var)
    }

    fn check_injective(&self) -> Result<(), CodegenError> {
        for map in [&self.pre, &self.post] {
            let mut seen = BTreeSet::new();
            for t in map.values() {
                if !seen.insert(&t.name) {
                    return Err(CodegenError::NonInjective(t.name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Target and field path of a scalar leaf reference.
    fn resolve<'a>(
        &'a self,
        leaf: &'a str,
        old: bool,
    ) -> Result<(&'a Target, Vec<&'a str>), CodegenError> {
        let mut parts = leaf.split('.');
        let var = parts.next().unwrap_or_default();
        let map = if old { &self.pre } else { &self.post };
        let target = map.get(var).ok_or_else(|| CodegenError::UnmappedVariable {
            var: var.to_string(),
            old,
        })?;
        Ok((target, parts.collect()))
    }
}

/// Types of every scalar leaf of `ctx`, keyed by leaf name.
pub(crate) fn leaf_types(ctx: &VarContext) -> BTreeMap<String, SemType> {
    Layout::new(ctx)
        .slots()
        .iter()
        .map(|s| (s.name.clone(), s.ty.clone()))
        .collect()
}

/// Type of a well-typed scalarized expression.
pub(crate) fn scalar_type(e: &Expr, leaves: &BTreeMap<String, SemType>) -> SemType {
    match e {
        Expr::Bool(_) | Expr::Not(_) => SemType::Bool,
        Expr::Int {
            signed: false,
            width,
            ..
        } => SemType::UInt(*width),
        Expr::Int {
            signed: true,
            width,
            ..
        } => SemType::SInt(*width),
        Expr::Var(n) | Expr::Old(n) => leaves.get(n).cloned().unwrap_or(SemType::Bool),
        Expr::Select(..) => unreachable!("scalarized"),
        Expr::Bin(op, a, _) => match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul => scalar_type(a, leaves),
            _ => SemType::Bool,
        },
        Expr::Ite(_, t, _) => scalar_type(t, leaves),
    }
}

/// Scalarizes `e` and checks every free variable is mapped.
fn prepare(e: &Expr, m: &NameMap) -> Result<Expr, CodegenError> {
    m.check_injective()?;
    let (pre, post) = e.free_vars();
    for v in &post {
        if !m.post.contains_key(v) {
            return Err(CodegenError::UnmappedVariable {
                var: v.clone(),
                old: false,
            });
        }
    }
    for v in &pre {
        if !m.pre.contains_key(v) {
            return Err(CodegenError::UnmappedVariable {
                var: v.clone(),
                old: true,
            });
        }
    }
    Ok(scalarize(e, &m.ctx)?)
}

/// Smallest machine width holding `w` bits.
pub(crate) fn machine_width(w: u32) -> u32 {
    match w {
        0..=8 => 8,
        9..=16 => 16,
        17..=32 => 32,
        _ => 64,
    }
}
