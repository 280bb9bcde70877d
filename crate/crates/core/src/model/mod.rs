//! Polyglot models: extended state machines whose transition updates are
//! sequences of procedure calls, plus properties and traces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::il::{self, Assignment, Expr, IlError, Position, SemType, Value, VarContext};
use crate::minilang::{parse_mini, MiniError, MiniProc};

mod file;
mod sim;

pub use file::{load_model, parse_model, parse_property_table, ModelError, PropertySpec};
pub use sim::{
    holds, simulate, Choice, Scheduler, ScriptedScheduler, SeededScheduler, SimError, Truth,
};

/// Name of the pseudo-variable through which properties observe the mode.
pub const MODE_VAR: &str = "mode";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    C,
    Rust,
    Mini,
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::C => "c",
            Language::Rust => "rust",
            Language::Mini => "mini",
        })
    }
}

/// How a harness reaches the storage of one IL variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Access {
    /// A plain global (C) or local (Rust) named by the binding.
    #[default]
    Direct,
    /// A pointer to the value.
    Pointer,
    /// A pointer to a `{ value, is_present }` port struct; the IL variable is `value`.
    Port,
}

/// Target-language location of an IL variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Binding {
    pub target: String,
    #[serde(default)]
    pub access: Access,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Procedure {
    pub name: String,
    pub language: Language,
    pub source: String,
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    /// Entry point called by harnesses (c/rust); defaults to `name`.
    pub entry: Option<String>,
    pub bindings: BTreeMap<String, Binding>,
    pub preamble: String,
}

impl Procedure {
    /// A mini-language procedure with reads/writes inferred from its body.
    pub fn mini(name: &str, source: &str, vars: &VarContext) -> Result<Procedure, MiniError> {
        let p = parse_mini(source, vars)?;
        Ok(Procedure {
            name: name.to_string(),
            language: Language::Mini,
            source: source.to_string(),
            reads: p.reads(),
            writes: p.writes(),
            entry: None,
            bindings: BTreeMap::new(),
            preamble: String::new(),
        })
    }

    pub fn interface(&self) -> BTreeSet<String> {
        self.reads.union(&self.writes).cloned().collect()
    }

    /// The procedure's own context: model variables in its interface.
    pub fn context(&self, vars: &VarContext) -> VarContext {
        let iface = self.interface();
        vars.restrict(iface.iter().map(String::as_str))
    }

    pub fn entry_name(&self) -> &str {
        self.entry.as_deref().unwrap_or(&self.name)
    }

    /// Target name and access style of `var` (identity/direct if unbound).
    pub fn binding(&self, var: &str) -> Binding {
        self.bindings.get(var).cloned().unwrap_or_else(|| Binding {
            target: var.to_string(),
            access: Access::Direct,
        })
    }

    /// Parses the body over the procedure context (mini only).
    pub fn mini_proc(&self, vars: &VarContext) -> Option<Result<MiniProc, MiniError>> {
        (self.language == Language::Mini).then(|| parse_mini(&self.source, &self.context(vars)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub id: String,
    pub from: String,
    pub to: String,
    pub guard: Expr,
    pub update: Vec<String>,
    pub duration: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Init {
    pub mode: String,
    pub predicate: Expr,
    /// Procedures applied, in order, to a state satisfying `predicate`.
    pub procedures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyglotModel {
    pub name: String,
    pub modes: Vec<String>,
    pub terminal: BTreeSet<String>,
    pub vars: VarContext,
    pub init: Init,
    pub transitions: Vec<Transition>,
    pub procedures: BTreeMap<String, Procedure>,
}

impl PolyglotModel {
    pub fn procedure(&self, name: &str) -> Option<&Procedure> {
        self.procedures.get(name)
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id == id)
    }

    /// Type of the `mode` pseudo-variable: one Bool field per mode.
    pub fn mode_type(&self) -> SemType {
        SemType::Record(
            self.modes
                .iter()
                .map(|m| (m.clone(), SemType::Bool))
                .collect(),
        )
    }

    /// Context properties are checked in: the variables plus `mode`.
    pub fn property_context(&self) -> Result<VarContext, IlError> {
        self.vars.with(MODE_VAR, self.mode_type())
    }

    pub fn mode_value(&self, mode: &str) -> Value {
        Value::Record(
            self.modes
                .iter()
                .map(|m| (m.clone(), Value::Bool(m == mode)))
                .collect(),
        )
    }

    /// `state` extended with the `mode` pseudo-variable.
    pub fn observe(&self, mode: &str, state: &Assignment) -> Assignment {
        let mut a = state.clone();
        a.set(MODE_VAR, self.mode_value(mode));
        a
    }

    /// Procedure names in first-use order (init first, then transitions).
    pub fn used_procedures(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for name in self
            .init
            .procedures
            .iter()
            .chain(self.transitions.iter().flat_map(|t| t.update.iter()))
        {
            if seen.insert(name.clone()) {
                out.push(name.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PropertyKind {
    Invariant,
    EventuallyWithin { time: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub kind: PropertyKind,
    /// Pre-position predicate over the variables and `mode`.
    pub predicate: Expr,
}

impl Property {
    pub fn invariant(predicate: Expr) -> Property {
        Property {
            kind: PropertyKind::Invariant,
            predicate,
        }
    }

    pub fn eventually_within(time: u64, predicate: Expr) -> Property {
        Property {
            kind: PropertyKind::EventuallyWithin { time },
            predicate,
        }
    }

    pub fn check(&self, m: &PolyglotModel) -> Result<(), IlError> {
        let ty = il::typecheck(&self.predicate, &m.property_context()?, Position::Pre)?;
        expect_bool_type(&self.predicate, ty)
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            PropertyKind::Invariant => write!(f, "G({})", self.predicate),
            PropertyKind::EventuallyWithin { time } => {
                write!(f, "F[0, {time}]({})", self.predicate)
            }
        }
    }
}

/// One procedure invocation inside a step, over the full model state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Call {
    pub procedure: String,
    pub pre: Assignment,
    pub post: Assignment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub mode: String,
    pub state: Assignment,
    /// Transition that led here; `None` for the initial step.
    pub transition: Option<String>,
    pub calls: Vec<Call>,
    pub time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<Step>,
    /// The last state has no enabled transition.
    pub maximal: bool,
}

impl Trace {
    pub fn end_time(&self) -> Option<u64> {
        self.steps.last().map(|s| s.time)
    }

    /// Checks the structural invariants against `m`.
    pub fn check(&self, m: &PolyglotModel) -> Result<(), String> {
        for (i, step) in self.steps.iter().enumerate() {
            step.state
                .check(&m.vars)
                .map_err(|e| format!("step {i}: {e}"))?;
            let start = if i == 0 {
                if step.mode != m.init.mode {
                    return Err("trace does not start in the initial mode".into());
                }
                let names: Vec<&String> = step.calls.iter().map(|c| &c.procedure).collect();
                if names != m.init.procedures.iter().collect::<Vec<_>>() {
                    return Err("initial calls do not match the init procedures".into());
                }
                step.calls
                    .first()
                    .map(|c| c.pre.clone())
                    .unwrap_or_else(|| step.state.clone())
            } else {
                let prev = &self.steps[i - 1];
                let id = step
                    .transition
                    .as_deref()
                    .ok_or(format!("step {i}: missing transition"))?;
                let t = m
                    .transition(id)
                    .ok_or(format!("step {i}: unknown transition `{id}`"))?;
                if t.from != prev.mode || t.to != step.mode {
                    return Err(format!(
                        "step {i}: transition `{id}` does not link the modes"
                    ));
                }
                if step.time != prev.time + t.duration {
                    return Err(format!("step {i}: time does not advance by the duration"));
                }
                if t.update
                    != step
                        .calls
                        .iter()
                        .map(|c| c.procedure.clone())
                        .collect::<Vec<_>>()
                {
                    return Err(format!("step {i}: calls do not match the update"));
                }
                prev.state.clone()
            };
            let mut cur = start;
            for c in &step.calls {
                if c.pre != cur {
                    return Err(format!("step {i}: call chain broken at `{}`", c.procedure));
                }
                cur = c.post.clone();
            }
            if cur != step.state {
                return Err(format!("step {i}: calls do not end in the step state"));
            }
        }
        Ok(())
    }
}

/// A well-formedness problem found by [`validate_model`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Diagnostic {
    #[error("the model declares no variables")]
    NoVariables,
    #[error("duplicate mode `{0}`")]
    DuplicateMode(String),
    #[error("mode name `{0}` is not an identifier")]
    BadModeName(String),
    #[error("unknown mode `{mode}` in {location}")]
    UnknownMode { location: String, mode: String },
    #[error("`{0}` is reserved for the mode pseudo-variable")]
    ReservedName(String),
    #[error("duplicate transition id `{0}`")]
    DuplicateTransition(String),
    #[error("transition `{transition}` calls unknown procedure `{procedure}`")]
    UnknownProcedure {
        transition: String,
        procedure: String,
    },
    #[error("transition `{0}` has an empty update")]
    EmptyUpdate(String),
    #[error("guard of transition `{0}` refers to old(..)")]
    OldInGuard(String),
    #[error("ill-typed {location}: {error}")]
    IllTyped { location: String, error: IlError },
    #[error("procedure `{procedure}` names undeclared variable `{var}`")]
    UndeclaredVariable { procedure: String, var: String },
    #[error("procedure `{procedure}`: {error}")]
    BadProcedure { procedure: String, error: MiniError },
    #[error("procedure `{procedure}` {kind} `{var}` outside its declared interface")]
    InterfaceMismatch {
        procedure: String,
        kind: &'static str,
        var: String,
    },
    #[error("binding for `{var}` in procedure `{procedure}` is not in its interface")]
    StrayBinding { procedure: String, var: String },
    #[error("the model has no transitions and no terminal mode")]
    NoBehavior,
}

/// Returns every well-formedness problem of `m`; empty means well-formed.
pub fn validate_model(m: &PolyglotModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if m.vars.is_empty() {
        out.push(Diagnostic::NoVariables);
    }
    if m.vars.contains(MODE_VAR) {
        out.push(Diagnostic::ReservedName(MODE_VAR.into()));
    }
    let mut modes = BTreeSet::new();
    for mode in &m.modes {
        if !modes.insert(mode.as_str()) {
            out.push(Diagnostic::DuplicateMode(mode.clone()));
        }
        if !il::is_identifier(mode) {
            out.push(Diagnostic::BadModeName(mode.clone()));
        }
    }
    let mode_ok = |location: String, mode: &str, out: &mut Vec<Diagnostic>| {
        if !modes.contains(mode) {
            out.push(Diagnostic::UnknownMode {
                location,
                mode: mode.to_string(),
            });
        }
    };
    mode_ok("init".into(), &m.init.mode, &mut out);
    for t in &m.terminal {
        mode_ok("terminal modes".into(), t, &mut out);
    }
    if let Err(error) = il::typecheck(&m.init.predicate, &m.vars, Position::Pre)
        .and_then(|ty| expect_bool_type(&m.init.predicate, ty))
    {
        out.push(Diagnostic::IllTyped {
            location: "init predicate".into(),
            error,
        });
    }
    for name in &m.init.procedures {
        if !m.procedures.contains_key(name) {
            out.push(Diagnostic::UnknownProcedure {
                transition: "init".into(),
                procedure: name.clone(),
            });
        }
    }
    let mut ids = BTreeSet::new();
    for t in &m.transitions {
        if !ids.insert(t.id.as_str()) {
            out.push(Diagnostic::DuplicateTransition(t.id.clone()));
        }
        mode_ok(format!("transition `{}`", t.id), &t.from, &mut out);
        mode_ok(format!("transition `{}`", t.id), &t.to, &mut out);
        if t.guard.contains_old() {
            out.push(Diagnostic::OldInGuard(t.id.clone()));
        } else if let Err(error) = il::typecheck(&t.guard, &m.vars, Position::Pre)
            .and_then(|ty| expect_bool_type(&t.guard, ty))
        {
            out.push(Diagnostic::IllTyped {
                location: format!("guard of `{}`", t.id),
                error,
            });
        }
        if t.update.is_empty() {
            out.push(Diagnostic::EmptyUpdate(t.id.clone()));
        }
        for name in &t.update {
            if !m.procedures.contains_key(name) {
                out.push(Diagnostic::UnknownProcedure {
                    transition: t.id.clone(),
                    procedure: name.clone(),
                });
            }
        }
    }
    if m.transitions.is_empty() && m.terminal.is_empty() {
        out.push(Diagnostic::NoBehavior);
    }
    for p in m.procedures.values() {
        validate_procedure(p, &m.vars, &mut out);
    }
    out
}

fn expect_bool_type(e: &Expr, ty: SemType) -> Result<(), IlError> {
    if ty == SemType::Bool {
        Ok(())
    } else {
        Err(IlError::Type {
            subterm: e.to_string(),
            expected: "bool".into(),
            found: ty.to_string(),
        })
    }
}

fn validate_procedure(p: &Procedure, vars: &VarContext, out: &mut Vec<Diagnostic>) {
    let mut ok = true;
    for v in p.interface() {
        if !vars.contains(&v) {
            out.push(Diagnostic::UndeclaredVariable {
                procedure: p.name.clone(),
                var: v,
            });
            ok = false;
        }
    }
    for v in p.bindings.keys() {
        if !p.interface().contains(v) {
            out.push(Diagnostic::StrayBinding {
                procedure: p.name.clone(),
                var: v.clone(),
            });
        }
    }
    if p.language != Language::Mini || !ok {
        return;
    }
    match parse_mini(&p.source, vars) {
        Err(error) => out.push(Diagnostic::BadProcedure {
            procedure: p.name.clone(),
            error,
        }),
        Ok(body) => {
            let iface = p.interface();
            for v in body.reads() {
                if !iface.contains(&v) {
                    out.push(Diagnostic::InterfaceMismatch {
                        procedure: p.name.clone(),
                        kind: "reads",
                        var: v,
                    });
                }
            }
            for v in body.writes() {
                if !p.writes.contains(&v) {
                    out.push(Diagnostic::InterfaceMismatch {
                        procedure: p.name.clone(),
                        kind: "writes",
                        var: v,
                    });
                }
            }
        }
    }
}
