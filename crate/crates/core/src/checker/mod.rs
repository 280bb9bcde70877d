//! Contract composition, the induced abstract model and bounded model
//! checking over SMT-LIB.
//!
//! Every procedure call in an update chain is replaced by the relation
//! `{(d, d') | P(d) ==> Q(d, d')}` on the procedure's interface, with the
//! other variables unchanged. Calls in a chain are composed through fresh
//! intermediate states. The unrolling uses one copy of the state per step
//! (`s<k>.<leaf>`), an integer mode `m<k>`, elapsed time `t<k>` and the
//! index `x<k>` of the transition taken.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::codegen::{compile_to_smt_with, smt_sort, smt_symbol, CodegenError};
use crate::example::ExamplePair;
use crate::il::flat::Layout;
use crate::il::{eval_bool, Assignment, Contract, Expr, IlError, VarContext};
use crate::model::{Call, PolyglotModel, Property, PropertyKind, Step, Trace, MODE_VAR};

mod smt;

pub use smt::{parse_sexpr, SExpr, Sat, Session, SolverConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckerError {
    #[error("solver error: {0}")]
    Solver(String),
    #[error("no contract for procedure `{0}`")]
    MissingContract(String),
    #[error("contracts do not compose in `{chain}` after call {junction}: {witness}")]
    CompositionFailure {
        chain: String,
        junction: usize,
        witness: Assignment,
    },
    #[error("bound must be at least 1")]
    ZeroBound,
    #[error(transparent)]
    Codegen(#[from] CodegenError),
    #[error(transparent)]
    Il(#[from] IlError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Composition {
    Pass,
    /// `Q_j` admits a state (over the model variables) that violates `P_{j+1}`.
    Fail {
        junction: usize,
        witness: Assignment,
    },
}

/// One abstracted call.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractCall {
    pub procedure: String,
    pub ctx: VarContext,
    pub contract: Contract,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractModel {
    pub model: PolyglotModel,
    pub init: Vec<AbstractCall>,
    /// Calls per transition, in the order of `model.transitions`.
    pub transitions: Vec<Vec<AbstractCall>>,
}

impl AbstractModel {
    /// Whether one abstracted call admits `pre -> post` over the full state.
    pub fn call_admits(
        &self,
        call: &AbstractCall,
        pre: &Assignment,
        post: &Assignment,
    ) -> Result<bool, IlError> {
        for (name, _) in self.model.vars.iter() {
            if !call.ctx.contains(name) && pre.get(name) != post.get(name) {
                return Ok(false);
            }
        }
        let (d, d2) = (pre.project(&call.ctx), post.project(&call.ctx));
        Ok(!eval_bool(&call.contract.pre, &d, None)?
            || eval_bool(&call.contract.post, &d, Some(&d2))?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum McResult {
    /// No violation within `bound` steps. `exhaustive` when every path
    /// was decided before the bound.
    Pass {
        bound: usize,
        exhaustive: bool,
    },
    Fail(Trace),
    Unknown(String),
}

fn calls_for(
    m: &PolyglotModel,
    names: &[String],
    contracts: &BTreeMap<String, Contract>,
) -> Result<Vec<AbstractCall>, CheckerError> {
    names
        .iter()
        .map(|n| {
            let p = m
                .procedure(n)
                .ok_or_else(|| CheckerError::MissingContract(n.clone()))?;
            let c = contracts
                .get(n)
                .ok_or_else(|| CheckerError::MissingContract(n.clone()))?;
            let ctx = p.context(&m.vars);
            c.typecheck(&ctx)?;
            Ok(AbstractCall {
                procedure: n.clone(),
                ctx,
                contract: c.clone(),
            })
        })
        .collect()
}

fn declare_state(
    s: &mut Session,
    layout: &Layout,
    name: &dyn Fn(&str) -> String,
) -> Result<(), CheckerError> {
    for slot in layout.slots() {
        s.declare(&name(&slot.name), &smt_sort(&slot.ty))?;
    }
    Ok(())
}

fn read_state(
    s: &mut Session,
    layout: &Layout,
    name: &dyn Fn(&str) -> String,
) -> Result<Assignment, CheckerError> {
    let terms: Vec<String> = layout.slots().iter().map(|sl| name(&sl.name)).collect();
    let vals = s.values(&terms)?;
    let flat = vals
        .iter()
        .zip(layout.slots())
        .map(|(v, sl)| {
            v.bits()
                .map(|b| b & crate::il::mask(sl.ty.width().unwrap_or(1)))
                .ok_or_else(|| {
                    CheckerError::Solver(format!("unreadable value {v:?} for {}", sl.name))
                })
        })
        .collect::<Result<Vec<u64>, CheckerError>>()?;
    Ok(layout.from_flat(&flat))
}

/// Checks that every `Q_j` implies `P_{j+1}` along a call chain.
pub fn check_composition(
    m: &PolyglotModel,
    chain: &[String],
    contracts: &BTreeMap<String, Contract>,
    solver: &SolverConfig,
) -> Result<Composition, CheckerError> {
    let calls = calls_for(m, chain, contracts)?;
    if calls.len() < 2 {
        return Ok(Composition::Pass);
    }
    let mut s = Session::start(solver)?;
    let layout = Layout::new(&m.vars);
    declare_state(&mut s, &layout, &|l| smt_symbol(&format!("a.{l}")))?;
    declare_state(&mut s, &layout, &|l| smt_symbol(&format!("b.{l}")))?;
    for (j, pair) in calls.windows(2).enumerate() {
        let (cur, next) = (&pair[0], &pair[1]);
        if next.contract.pre == Expr::tt() {
            continue;
        }
        let q = compile_to_smt_with(&cur.contract.post, &cur.ctx, &|l, old| {
            Some(smt_symbol(&format!("{}.{l}", if old { "a" } else { "b" })))
        })?;
        let p = compile_to_smt_with(&next.contract.pre, &next.ctx, &|l, _| {
            Some(smt_symbol(&format!("b.{l}")))
        })?;
        s.push()?;
        s.assert(&q)?;
        s.assert(&format!("(not {p})"))?;
        match s.check()? {
            Sat::Unsat => s.pop()?,
            Sat::Sat => {
                let both: BTreeSet<&str> = cur.ctx.names().chain(next.ctx.names()).collect();
                let full = read_state(&mut s, &layout, &|l| smt_symbol(&format!("b.{l}")))?;
                let witness = full.project(&m.vars.restrict(both));
                return Ok(Composition::Fail {
                    junction: j,
                    witness,
                });
            }
            Sat::Unknown => {
                return Err(CheckerError::Solver(
                    "unknown result while checking composition".into(),
                ))
            }
        }
    }
    Ok(Composition::Pass)
}

/// Builds the contract-abstracted model, checking composition first.
pub fn induce(
    m: &PolyglotModel,
    contracts: &BTreeMap<String, Contract>,
    solver: &SolverConfig,
) -> Result<AbstractModel, CheckerError> {
    let chains = std::iter::once(("init".to_string(), &m.init.procedures))
        .chain(m.transitions.iter().map(|t| (t.id.clone(), &t.update)));
    for (label, chain) in chains {
        if let Composition::Fail { junction, witness } =
            check_composition(m, chain, contracts, solver)?
        {
            return Err(CheckerError::CompositionFailure {
                chain: label,
                junction,
                witness,
            });
        }
    }
    Ok(AbstractModel {
        model: m.clone(),
        init: calls_for(m, &m.init.procedures, contracts)?,
        transitions: m
            .transitions
            .iter()
            .map(|t| calls_for(m, &t.update, contracts))
            .collect::<Result<_, _>>()?,
    })
}

/// Per-procedure pairs of a trace, projected on each procedure's
/// interface, deduplicated in first-seen order.
pub fn extract(m: &PolyglotModel, t: &Trace) -> BTreeMap<String, Vec<ExamplePair>> {
    let mut out: BTreeMap<String, Vec<ExamplePair>> = BTreeMap::new();
    for step in &t.steps {
        for c in &step.calls {
            let ctx = match m.procedure(&c.procedure) {
                Some(p) => p.context(&m.vars),
                None => continue,
            };
            let x = ExamplePair::negative(c.pre.project(&ctx), c.post.project(&ctx));
            let v = out.entry(c.procedure.clone()).or_default();
            if !v.contains(&x) {
                v.push(x);
            }
        }
    }
    out
}

struct Unroller<'a> {
    a: &'a AbstractModel,
    s: Session,
    layout: Layout,
    max_chain: usize,
    /// Highest step declared so far.
    depth: usize,
}

fn st(k: usize, leaf: &str) -> String {
    smt_symbol(&format!("s{k}.{leaf}"))
}

fn inter(k: usize, j: usize, leaf: &str) -> String {
    smt_symbol(&format!("i{k}.{j}.{leaf}"))
}

impl<'a> Unroller<'a> {
    fn m(&self) -> &PolyglotModel {
        &self.a.model
    }

    fn mode_index(&self, mode: &str) -> usize {
        self.m()
            .modes
            .iter()
            .position(|x| x == mode)
            .expect("validated mode")
    }

    /// Symbol of a leaf at position `j` of the chain of `n` calls leading into step `k`.
    fn chain_state(k: usize, j: usize, n: usize, leaf: &str) -> String {
        if j == n {
            st(k, leaf)
        } else if j == 0 && k > 0 {
            st(k - 1, leaf)
        } else {
            inter(k, j, leaf)
        }
    }

    fn call_relation(
        &self,
        call: &AbstractCall,
        k: usize,
        j: usize,
        n: usize,
    ) -> Result<String, CheckerError> {
        let pre = |l: &str| Self::chain_state(k, j, n, l);
        let post = |l: &str| Self::chain_state(k, j + 1, n, l);
        let p = compile_to_smt_with(&call.contract.pre, &call.ctx, &|l, _| Some(pre(l)))?;
        let q = compile_to_smt_with(&call.contract.post, &call.ctx, &|l, old| {
            Some(if old { pre(l) } else { post(l) })
        })?;
        let mut parts = vec![format!("(=> {p} {q})")];
        for slot in self.layout.slots() {
            if !call.ctx.contains(&slot.var) {
                parts.push(format!("(= {} {})", post(&slot.name), pre(&slot.name)));
            }
        }
        Ok(format!("(and {})", parts.join(" ")))
    }

    fn state_term(&self, e: &Expr, k: usize) -> Result<String, CheckerError> {
        Ok(compile_to_smt_with(e, &self.m().vars, &|l, _| {
            Some(st(k, l))
        })?)
    }

    fn property_term(&self, e: &Expr, k: usize) -> Result<String, CheckerError> {
        let ctx = self.m().property_context()?;
        let prefix = format!("{MODE_VAR}.");
        Ok(compile_to_smt_with(
            e,
            &ctx,
            &|l, _| match l.strip_prefix(&prefix) {
                Some(mode) => Some(format!("(= m{k} {})", self.mode_index(mode))),
                None => Some(st(k, l)),
            },
        )?)
    }

    fn enabled(&self, k: usize) -> Result<Vec<String>, CheckerError> {
        self.m()
            .transitions
            .iter()
            .map(|t| {
                Ok(format!(
                    "(and (= m{k} {}) {})",
                    self.mode_index(&t.from),
                    self.state_term(&t.guard, k)?
                ))
            })
            .collect()
    }

    fn maximal(&self, k: usize) -> Result<String, CheckerError> {
        let en = self.enabled(k)?;
        Ok(if en.is_empty() {
            "true".into()
        } else {
            format!("(not (or {}))", en.join(" "))
        })
    }

    fn declare_step(&mut self, k: usize) -> Result<(), CheckerError> {
        let layout = self.layout.clone();
        declare_state(&mut self.s, &layout, &|l| st(k, l))?;
        for v in ["m", "t", "x"] {
            self.s.declare(&format!("{v}{k}"), "Int")?;
        }
        let inters: Vec<usize> = if k == 0 {
            (0..self.a.init.len()).collect()
        } else {
            (1..self.max_chain).collect()
        };
        for j in inters {
            declare_state(&mut self.s, &layout, &|l| inter(k, j, l))?;
        }
        Ok(())
    }

    fn start(&mut self) -> Result<(), CheckerError> {
        self.declare_step(0)?;
        let m = self.a.model.clone();
        let n = self.a.init.len();
        let start = format!(
            "(and (= m0 {}) (= t0 0) (= x0 (- 1)))",
            self.mode_index(&m.init.mode)
        );
        self.s.assert(&start)?;
        let init = compile_to_smt_with(&m.init.predicate, &m.vars, &|l, _| {
            Some(Self::chain_state(0, 0, n, l))
        })?;
        self.s.assert(&init)?;
        for j in 0..n {
            let r = self.call_relation(&self.a.init[j], 0, j, n)?;
            self.s.assert(&r)?;
        }
        Ok(())
    }

    fn extend(&mut self) -> Result<(), CheckerError> {
        let k = self.depth + 1;
        self.declare_step(k)?;
        let mut alts = Vec::new();
        for (i, t) in self.m().transitions.iter().enumerate() {
            let calls = &self.a.transitions[i];
            let n = calls.len();
            let mut parts = vec![
                format!("(= m{} {})", k - 1, self.mode_index(&t.from)),
                self.state_term(&t.guard, k - 1)?,
                format!("(= m{k} {})", self.mode_index(&t.to)),
                format!("(= t{k} (+ t{} {}))", k - 1, t.duration),
                format!("(= x{k} {i})"),
            ];
            for (j, c) in calls.iter().enumerate() {
                parts.push(self.call_relation(c, k, j, n)?);
            }
            alts.push(format!("(and {})", parts.join(" ")));
        }
        let rel = if alts.is_empty() {
            "false".to_string()
        } else {
            format!("(or {})", alts.join(" "))
        };
        self.s.assert(&rel)?;
        self.depth = k;
        Ok(())
    }

    fn int(&mut self, name: String) -> Result<i64, CheckerError> {
        let v = self.s.values(std::slice::from_ref(&name))?;
        v[0].bits()
            .map(|b| b as i64)
            .ok_or_else(|| CheckerError::Solver(format!("unreadable value for {name}")))
    }

    /// Reads the path of length `k` from the current model.
    fn read_trace(&mut self, k: usize) -> Result<Trace, CheckerError> {
        let layout = self.layout.clone();
        let mut steps = Vec::new();
        for j in 0..=k {
            let mode_ix = self.int(format!("m{j}"))? as usize;
            let time = self.int(format!("t{j}"))? as u64;
            let state = read_state(&mut self.s, &layout, &|l| st(j, l))?;
            let (transition, calls_meta) = if j == 0 {
                (
                    None,
                    self.a
                        .init
                        .iter()
                        .map(|c| c.procedure.clone())
                        .collect::<Vec<_>>(),
                )
            } else {
                let x = self.int(format!("x{j}"))? as usize;
                let t = &self.m().transitions[x];
                (Some(t.id.clone()), t.update.clone())
            };
            let n = calls_meta.len();
            let mut chain = Vec::new();
            for pos in 0..=n {
                chain.push(read_state(&mut self.s, &layout, &|l| {
                    Self::chain_state(j, pos, n, l)
                })?);
            }
            let calls = calls_meta
                .into_iter()
                .enumerate()
                .map(|(i, procedure)| Call {
                    procedure,
                    pre: chain[i].clone(),
                    post: chain[i + 1].clone(),
                })
                .collect();
            steps.push(Step {
                mode: self.m().modes[mode_ix].clone(),
                state,
                transition,
                calls,
                time,
            });
        }
        let mut trace = Trace {
            steps,
            maximal: false,
        };
        trace.maximal = is_maximal(self.m(), trace.steps.last().expect("nonempty"))?;
        Ok(trace)
    }
}

fn is_maximal(m: &PolyglotModel, last: &Step) -> Result<bool, IlError> {
    for t in m.transitions.iter().filter(|t| t.from == last.mode) {
        if eval_bool(&t.guard, &last.state, None)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Bounded model checking of the abstract model for up to `bound`
/// transitions. For `EventuallyWithin`, among violating paths that end in
/// a state with no enabled transition the one with the largest elapsed
/// time is returned; a path cut off after the deadline is returned only
/// when no such path exists.
pub fn bmc(
    a: &AbstractModel,
    p: &Property,
    bound: usize,
    solver: &SolverConfig,
) -> Result<McResult, CheckerError> {
    if bound == 0 {
        return Err(CheckerError::ZeroBound);
    }
    let s = Session::start(solver)?;
    let max_chain = a.transitions.iter().map(Vec::len).max().unwrap_or(0);
    let mut u = Unroller {
        a,
        s,
        layout: Layout::new(&a.model.vars),
        max_chain,
        depth: 0,
    };
    u.start()?;
    let mut best: Option<(i64, Trace)> = None;
    let mut truncated: Option<Trace> = None;
    let mut k = 0;
    loop {
        let pred = u.property_term(&p.predicate, k)?;
        match p.kind {
            PropertyKind::Invariant => {
                u.s.push()?;
                u.s.assert(&format!("(not {pred})"))?;
                match u.s.check()? {
                    Sat::Sat => return Ok(McResult::Fail(u.read_trace(k)?)),
                    Sat::Unknown => {
                        return Ok(McResult::Unknown(format!("solver gave up at step {k}")))
                    }
                    Sat::Unsat => u.s.pop()?,
                }
                u.s.assert(&pred)?;
            }
            PropertyKind::EventuallyWithin { time } => {
                u.s.assert(&format!("(=> (<= t{k} {time}) (not {pred}))"))?;
                let maximal = u.maximal(k)?;
                loop {
                    u.s.push()?;
                    u.s.assert(&maximal)?;
                    if let Some((t, _)) = &best {
                        u.s.assert(&format!("(> t{k} {t})"))?;
                    }
                    let r = u.s.check()?;
                    if r == Sat::Sat {
                        let tr = u.read_trace(k)?;
                        let t = tr.end_time().unwrap_or(0) as i64;
                        best = Some((t, tr));
                    }
                    u.s.pop()?;
                    match r {
                        Sat::Sat => continue,
                        Sat::Unsat => break,
                        Sat::Unknown => {
                            return Ok(McResult::Unknown(format!("solver gave up at step {k}")))
                        }
                    }
                }
                if truncated.is_none() && best.is_none() {
                    u.s.push()?;
                    u.s.assert(&format!("(> t{k} {time})"))?;
                    match u.s.check()? {
                        Sat::Sat => truncated = Some(u.read_trace(k)?),
                        Sat::Unknown => {
                            return Ok(McResult::Unknown(format!("solver gave up at step {k}")))
                        }
                        Sat::Unsat => {}
                    }
                    u.s.pop()?;
                }
            }
        }
        // No surviving path of length k means none of any greater length.
        match u.s.check()? {
            Sat::Unsat => {
                return Ok(match best.or(truncated.map(|t| (0, t))) {
                    Some((_, t)) => McResult::Fail(t),
                    None => McResult::Pass {
                        bound,
                        exhaustive: true,
                    },
                })
            }
            Sat::Unknown => return Ok(McResult::Unknown(format!("solver gave up at step {k}"))),
            Sat::Sat => {}
        }
        if k == bound {
            break;
        }
        u.extend()?;
        k += 1;
    }
    Ok(match best.map(|(_, t)| t).or(truncated) {
        Some(t) => McResult::Fail(t),
        None => {
            log::warn!("bmc: paths remain undecided at bound {bound}");
            McResult::Pass {
                bound,
                exhaustive: false,
            }
        }
    })
}
