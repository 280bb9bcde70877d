//! Whole-file harnesses: nondeterministic initialization, `old` snapshots,
//! assume(pre), the call, assert(post).
//!
//! Every scalar leaf is also copied into `__pv_pre_<leaf>` before the call
//! and `__pv_post_<leaf>` after it, so counterexample traces can be read
//! back by name. In Kani harnesses the post copies are fresh `kani::any()`
//! values pinned by an assumption, which makes them part of the concrete
//! playback byte stream.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::c::{c_lvalue, c_scalar_type};
use super::rust::{literal as rust_literal, rust_scalar_type};
use super::{compile_to_c, compile_to_rust, machine_width, CodegenError, NameMap};
use crate::il::flat::leaf_name;
use crate::il::{mask, Contract, SemType, VarContext};
use crate::model::{Access, Procedure};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Input,
    Output,
    State,
}

/// One interface variable of a harness.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessVar {
    pub name: String,
    pub ty: SemType,
    pub role: Role,
    /// Name in the target program.
    pub target: String,
    pub access: Access,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessSpec {
    pub source: String,
    pub entry: String,
    pub vars: Vec<HarnessVar>,
    pub contract: Contract,
    pub preamble: String,
    /// IL names of the variables initialized nondeterministically.
    pub nondet: Vec<String>,
}

impl HarnessSpec {
    /// Harness for `p` over the model variables `vars`, with every
    /// interface variable nondeterministic.
    pub fn from_procedure(p: &Procedure, vars: &VarContext, contract: Contract) -> HarnessSpec {
        let ctx = p.context(vars);
        let hvars: Vec<HarnessVar> = ctx
            .iter()
            .map(|(name, ty)| {
                let role = match (p.reads.contains(name), p.writes.contains(name)) {
                    (true, true) => Role::State,
                    (true, false) => Role::Input,
                    _ => Role::Output,
                };
                let b = p.binding(name);
                HarnessVar {
                    name: name.to_string(),
                    ty: ty.clone(),
                    role,
                    target: b.target,
                    access: b.access,
                }
            })
            .collect();
        HarnessSpec {
            source: p.source.clone(),
            entry: p.entry_name().to_string(),
            nondet: hvars.iter().map(|v| v.name.clone()).collect(),
            vars: hvars,
            contract,
            preamble: p.preamble.clone(),
        }
    }

    pub fn context(&self) -> Result<VarContext, CodegenError> {
        Ok(VarContext::new(
            self.vars
                .iter()
                .map(|v| (v.name.clone(), v.ty.clone()))
                .collect(),
        )?)
    }

    fn validate(&self) -> Result<VarContext, CodegenError> {
        if self.entry.trim().is_empty() {
            return Err(CodegenError::MissingEntry);
        }
        let ctx = self.context()?;
        for e in [&self.contract.pre, &self.contract.post] {
            let (pre, post) = e.free_vars();
            if let Some(v) = pre.union(&post).find(|v| !ctx.contains(v)) {
                return Err(CodegenError::ContractVariableUnmapped(v.clone()));
            }
        }
        self.contract.typecheck(&ctx)?;
        Ok(ctx)
    }

    fn maps(&self, ctx: &VarContext) -> NameMap {
        let mut m = NameMap::new(ctx);
        for v in &self.vars {
            m = m.with_post(&v.name, &v.target, v.access).with_pre(
                &v.name,
                &format!("old_{}", v.name),
                Access::Direct,
            );
        }
        m
    }

    fn old_vars(&self) -> BTreeSet<String> {
        let mut olds = self.contract.pre.free_vars().0;
        olds.extend(self.contract.post.free_vars().0);
        olds
    }
}

fn sanitize(leaf: &str) -> String {
    leaf.replace('.', "_")
}

/// Range assumption text for odd widths, `None` when the storage type is exact.
fn range(ty: &SemType, lv: &str, rust: bool) -> Option<String> {
    let w = ty.width()?;
    if w == machine_width(w) {
        return None;
    }
    Some(match ty {
        SemType::UInt(_) if rust => format!("{lv} <= {}", rust_literal(ty, mask(w))),
        SemType::UInt(_) => format!("{lv} <= {}U", mask(w)),
        SemType::SInt(_) => {
            let lo = -(1i64 << (w - 1));
            let hi = (1i64 << (w - 1)) - 1;
            if rust {
                let t = rust_scalar_type(ty);
                format!("{lv} >= ({lo}{t}) && {lv} <= {hi}{t}")
            } else {
                format!("{lv} >= {lo} && {lv} <= {hi}")
            }
        }
        _ => return None,
    })
}

/// C type name of a harness variable's storage.
fn c_var_type(v: &HarnessVar) -> String {
    match (&v.ty, v.access) {
        (SemType::Record(_), _) | (_, Access::Port) => format!("{}_t", v.target),
        (ty, _) => c_scalar_type(ty),
    }
}

fn c_record_typedefs(name: &str, ty: &SemType, out: &mut String) {
    let SemType::Record(fields) = ty else { return };
    let mut body = String::new();
    for (f, fty) in fields {
        let tname = match fty {
            SemType::Record(_) => {
                let inner = format!("{name}_{f}");
                c_record_typedefs(&inner, fty, out);
                format!("{inner}_t")
            }
            scalar => c_scalar_type(scalar),
        };
        let _ = write!(body, " {tname} {f};");
    }
    let _ = writeln!(out, "typedef struct {{{body} }} {name}_t;");
}

/// Emits a complete C translation unit for CBMC.
pub fn emit_cbmc_harness(h: &HarnessSpec) -> Result<String, CodegenError> {
    let ctx = h.validate()?;
    let names = h.maps(&ctx);
    let pre = compile_to_c(&h.contract.pre, &names)?;
    let post = compile_to_c(&h.contract.post, &names)?;
    let nondet: BTreeSet<&str> = h.nondet.iter().map(String::as_str).collect();

    let mut leaves = Vec::new();
    for v in &h.vars {
        for (path, ty) in v.ty.leaves() {
            let refs: Vec<&str> = path.iter().map(String::as_str).collect();
            let lv = c_lvalue(&v.target, v.access, &refs, &v.name)?;
            leaves.push((v, leaf_name(&v.name, &path), ty, lv));
        }
    }

    let mut out = String::new();
    out.push_str(
        "#include <assert.h>\n#include <stdbool.h>\n#include <stdint.h>\n#include <stdlib.h>\n",
    );
    if !h.preamble.trim().is_empty() {
        out.push('\n');
        out.push_str(h.preamble.trim_end());
        out.push('\n');
    }

    out.push('\n');
    let mut scalar_types = BTreeSet::new();
    for v in &h.vars {
        match (&v.ty, v.access) {
            (SemType::Record(_), _) => c_record_typedefs(&v.target, &v.ty, &mut out),
            (ty, Access::Port) => {
                let _ = writeln!(
                    out,
                    "typedef struct {{ {} value; bool is_present; }} {}_t;",
                    c_scalar_type(ty),
                    v.target
                );
                scalar_types.insert("bool".to_string());
            }
            _ => {}
        }
    }
    for v in h.vars.iter().filter(|v| v.access == Access::Direct) {
        let _ = writeln!(out, "{} {};", c_var_type(v), v.target);
    }
    for (_, _, ty, _) in &leaves {
        scalar_types.insert(c_scalar_type(ty));
    }
    for t in &scalar_types {
        let _ = writeln!(out, "{t} nondet_{t}(void);");
    }

    out.push('\n');
    out.push_str(h.source.trim_end());
    out.push_str("\n\nint main(void) {\n");
    for v in h.vars.iter().filter(|v| v.access != Access::Direct) {
        let t = c_var_type(v);
        let _ = writeln!(out, "    {t} *{} = calloc(1, sizeof({t}));", v.target);
        let _ = writeln!(out, "    __CPROVER_assume({} != NULL);", v.target);
    }
    for (v, _, ty, lv) in &leaves {
        if !nondet.contains(v.name.as_str()) {
            continue;
        }
        let t = c_scalar_type(ty);
        let _ = writeln!(out, "    {lv} = nondet_{t}();");
        if let Some(r) = range(ty, lv, false) {
            let _ = writeln!(out, "    __CPROVER_assume({r});");
        }
    }
    for v in h
        .vars
        .iter()
        .filter(|v| v.access == Access::Port && nondet.contains(v.name.as_str()))
    {
        let _ = writeln!(out, "    {}->is_present = nondet_bool();", v.target);
    }
    for (_, leaf, ty, lv) in &leaves {
        let _ = writeln!(
            out,
            "    {} __pv_pre_{} = {lv};",
            c_scalar_type(ty),
            sanitize(leaf)
        );
    }
    let olds = h.old_vars();
    for v in h.vars.iter().filter(|v| olds.contains(&v.name)) {
        let value = match v.access {
            Access::Direct => v.target.clone(),
            Access::Pointer => format!("*{}", v.target),
            Access::Port => format!("{}->value", v.target),
        };
        let t = match (&v.ty, v.access) {
            (SemType::Record(_), _) => c_var_type(v),
            (ty, _) => c_scalar_type(ty),
        };
        let _ = writeln!(out, "    {t} old_{} = {value};", v.name);
    }
    let _ = writeln!(out, "    __CPROVER_assume({pre});");
    let args: Vec<&str> = h
        .vars
        .iter()
        .filter(|v| v.access != Access::Direct)
        .map(|v| v.target.as_str())
        .collect();
    let _ = writeln!(out, "    {}({});", h.entry, args.join(", "));
    for (_, leaf, ty, lv) in &leaves {
        let _ = writeln!(
            out,
            "    {} __pv_post_{} = {lv};",
            c_scalar_type(ty),
            sanitize(leaf)
        );
    }
    let _ = writeln!(out, "    assert({post});");
    out.push_str("    return 0;\n}\n");
    Ok(out)
}

/// Emits a complete Rust source file with a Kani proof harness. Every
/// variable is a scalar local passed to the entry point as `&mut`.
pub fn emit_kani_harness(h: &HarnessSpec) -> Result<String, CodegenError> {
    let ctx = h.validate()?;
    for v in &h.vars {
        if v.access != Access::Direct || matches!(v.ty, SemType::Record(_)) {
            return Err(CodegenError::UnsupportedAccess {
                var: v.name.clone(),
                reason: "Rust harnesses support direct scalar variables only".into(),
            });
        }
    }
    let names = h.maps(&ctx);
    let pre = compile_to_rust(&h.contract.pre, &names)?;
    let post = compile_to_rust(&h.contract.post, &names)?;
    let nondet: BTreeSet<&str> = h.nondet.iter().map(String::as_str).collect();

    let mut out = String::new();
    if !h.preamble.trim().is_empty() {
        out.push_str(h.preamble.trim_end());
        out.push_str("\n\n");
    }
    out.push_str(h.source.trim_end());
    let _ = write!(
        out,
        "\n\n#[cfg(kani)]\n#[kani::proof]\n#[allow(unused_parens)]\nfn check_{}() {{\n",
        h.entry.replace("::", "_")
    );
    for v in &h.vars {
        let t = rust_scalar_type(&v.ty);
        if nondet.contains(v.name.as_str()) {
            let _ = writeln!(out, "    let mut {}: {t} = kani::any();", v.target);
            if let Some(r) = range(&v.ty, &v.target, true) {
                let _ = writeln!(out, "    kani::assume({r});");
            }
        } else {
            let _ = writeln!(out, "    let mut {}: {t} = Default::default();", v.target);
        }
    }
    let olds = h.old_vars();
    for v in h.vars.iter().filter(|v| olds.contains(&v.name)) {
        let _ = writeln!(out, "    let old_{} = {};", v.name, v.target);
    }
    let _ = writeln!(out, "    kani::assume({pre});");
    let args: Vec<String> = h
        .vars
        .iter()
        .map(|v| format!("&mut {}", v.target))
        .collect();
    let _ = writeln!(out, "    {}({});", h.entry, args.join(", "));
    for v in &h.vars {
        let t = rust_scalar_type(&v.ty);
        let _ = writeln!(out, "    let __pv_post_{}: {t} = kani::any();", v.name);
        let _ = writeln!(
            out,
            "    kani::assume(__pv_post_{} == {});",
            v.name, v.target
        );
    }
    let _ = writeln!(out, "    assert!({post});");
    out.push_str("}\n");
    Ok(out)
}
