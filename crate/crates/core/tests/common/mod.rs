//! Shared test helpers: random well-typed expressions, random states and
//! external-tool gating.
#![allow(dead_code)]

pub mod backends;

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;

use contraglot::il::flat::Layout;
use contraglot::il::{eval_bool, Assignment, BinOp, Contract, Expr, SemType, Sign, VarContext};
use contraglot::minilang::{exec_mini, parse_mini, print_body, strongest_post, LValue, Stmt};
use contraglot::model::{
    Init, PolyglotModel, Procedure, Property, PropertyKind, Trace, Transition,
};
use rand::Rng;

/// True if `tool --version` runs.
pub fn have(tool: &str) -> bool {
    Command::new(tool)
        .arg("--version")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

/// Scalar leaf references of `ctx` with their types, as select chains.
pub fn leaves(ctx: &VarContext) -> Vec<(Expr, Expr, SemType)> {
    let mut out = Vec::new();
    for (name, ty) in ctx.iter() {
        for (path, leaf_ty) in ty.leaves() {
            let mut cur = Expr::var(name);
            let mut old = Expr::old(name);
            for f in &path {
                cur = cur.select(f);
                old = old.select(f);
            }
            out.push((cur, old, leaf_ty));
        }
    }
    out
}

pub struct Gen<'a> {
    pub leaves: Vec<(Expr, Expr, SemType)>,
    pub allow_old: bool,
    pub ctx: &'a VarContext,
}

impl<'a> Gen<'a> {
    pub fn new(ctx: &'a VarContext, allow_old: bool) -> Gen<'a> {
        Gen {
            leaves: leaves(ctx),
            allow_old,
            ctx,
        }
    }

    fn int_types(&self) -> Vec<SemType> {
        let mut tys: Vec<SemType> = self
            .leaves
            .iter()
            .map(|l| l.2.clone())
            .filter(SemType::is_int)
            .collect();
        tys.dedup();
        tys
    }

    fn leaf_of(&self, rng: &mut impl Rng, ty: &SemType) -> Option<Expr> {
        let cands: Vec<&(Expr, Expr, SemType)> =
            self.leaves.iter().filter(|l| &l.2 == ty).collect();
        if cands.is_empty() {
            return None;
        }
        let (cur, old, _) = cands[rng.gen_range(0..cands.len())];
        Some(if self.allow_old && rng.gen_bool(0.3) {
            old.clone()
        } else {
            cur.clone()
        })
    }

    fn literal(&self, rng: &mut impl Rng, ty: &SemType) -> Expr {
        let w = ty.width().unwrap();
        let m = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
        let bits = match rng.gen_range(0..4) {
            0 => 0,
            1 => 1,
            2 => m,
            _ => rng.gen::<u64>() & m,
        };
        Expr::int_of(ty, bits)
    }

    pub fn boolean(&self, rng: &mut impl Rng, depth: u32) -> Expr {
        if depth == 0 || rng.gen_bool(0.2) {
            return match rng.gen_range(0..3) {
                0 => Expr::Bool(rng.gen()),
                _ => self
                    .leaf_of(rng, &SemType::Bool)
                    .unwrap_or_else(|| Expr::Bool(rng.gen())),
            };
        }
        let d = depth - 1;
        match rng.gen_range(0..9) {
            0 => Expr::not(self.boolean(rng, d)),
            1 => Expr::and(self.boolean(rng, d), self.boolean(rng, d)),
            2 => Expr::or(self.boolean(rng, d), self.boolean(rng, d)),
            3 => Expr::implies(self.boolean(rng, d), self.boolean(rng, d)),
            4 => Expr::ite(
                self.boolean(rng, d),
                self.boolean(rng, d),
                self.boolean(rng, d),
            ),
            5 => Expr::eq(self.boolean(rng, d), self.boolean(rng, d)),
            _ => {
                let tys = self.int_types();
                if tys.is_empty() {
                    return self.boolean(rng, d);
                }
                let ty = tys[rng.gen_range(0..tys.len())].clone();
                let (a, b) = (self.int(rng, &ty, d), self.int(rng, &ty, d));
                let s = if ty.is_signed() {
                    Sign::Signed
                } else {
                    Sign::Unsigned
                };
                let op = match rng.gen_range(0..6) {
                    0 => BinOp::Eq,
                    1 => BinOp::Neq,
                    2 => BinOp::Lt(s),
                    3 => BinOp::Le(s),
                    4 => BinOp::Gt(s),
                    _ => BinOp::Ge(s),
                };
                Expr::bin(op, a, b)
            }
        }
    }

    pub fn int(&self, rng: &mut impl Rng, ty: &SemType, depth: u32) -> Expr {
        if depth == 0 || rng.gen_bool(0.25) {
            if rng.gen_bool(0.6) {
                if let Some(l) = self.leaf_of(rng, ty) {
                    return l;
                }
            }
            return self.literal(rng, ty);
        }
        let d = depth - 1;
        match rng.gen_range(0..5) {
            0 => Expr::bin(BinOp::Add, self.int(rng, ty, d), self.int(rng, ty, d)),
            1 => Expr::bin(BinOp::Sub, self.int(rng, ty, d), self.int(rng, ty, d)),
            2 => Expr::bin(BinOp::Mul, self.int(rng, ty, d), self.int(rng, ty, d)),
            3 => Expr::ite(
                self.boolean(rng, d),
                self.int(rng, ty, d),
                self.int(rng, ty, d),
            ),
            _ => self.int(rng, ty, 0),
        }
    }
}

/// A uniformly random state of `ctx`.
pub fn random_state(rng: &mut impl Rng, ctx: &VarContext) -> Assignment {
    let layout = Layout::new(ctx);
    let flat: Vec<u64> = layout
        .slots()
        .iter()
        .map(|s| {
            let w = s.ty.width().unwrap_or(1);
            let m = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
            rng.gen::<u64>() & m
        })
        .collect();
    layout.from_flat(&flat)
}

/// Random small mini-language model with a random property: at most three
/// modes, three procedures and three variables of at most three bits.
pub fn random_model(rng: &mut impl Rng) -> (PolyglotModel, Property) {
    let scalar = [
        SemType::UInt(1),
        SemType::UInt(2),
        SemType::UInt(3),
        SemType::SInt(2),
        SemType::SInt(3),
        SemType::Bool,
    ];
    let nvars = rng.gen_range(1..=3);
    let vars = VarContext::new(
        (0..nvars)
            .map(|i| {
                (
                    ["a", "b", "c"][i].to_string(),
                    scalar[rng.gen_range(0..scalar.len())].clone(),
                )
            })
            .collect(),
    )
    .unwrap();
    let modes: Vec<String> = (0..rng.gen_range(1..=3)).map(|i| format!("m{i}")).collect();
    let g = Gen::new(&vars, false);
    let names: Vec<(String, SemType)> = vars
        .iter()
        .map(|(n, t)| (n.to_string(), t.clone()))
        .collect();

    fn stmt(rng: &mut impl Rng, g: &Gen<'_>, names: &[(String, SemType)], depth: u32) -> Stmt {
        let (v, ty) = names[rng.gen_range(0..names.len())].clone();
        let lv = LValue {
            var: v,
            path: Vec::new(),
        };
        match rng.gen_range(0..10) {
            0 | 1 => Stmt::Havoc(lv, None),
            2 | 3 if depth > 0 => {
                let t = vec![stmt(rng, g, names, depth - 1)];
                let f = if rng.gen_bool(0.5) {
                    vec![stmt(rng, g, names, depth - 1)]
                } else {
                    Vec::new()
                };
                Stmt::If(g.boolean(rng, 1), t, f)
            }
            _ => {
                let e = if ty == SemType::Bool {
                    g.boolean(rng, 2)
                } else {
                    g.int(rng, &ty, 2)
                };
                Stmt::Assign(lv, e)
            }
        }
    }

    let mut procedures = BTreeMap::new();
    let nprocs = rng.gen_range(1..=3);
    for i in 0..nprocs {
        let body: Vec<Stmt> = (0..rng.gen_range(1..=2))
            .map(|_| stmt(rng, &g, &names, 1))
            .collect();
        let name = format!("P{i}");
        let p = Procedure::mini(&name, &print_body(&body), &vars).unwrap();
        procedures.insert(name, p);
    }
    let pick_proc = |rng: &mut dyn rand::RngCore| format!("P{}", rng.gen_range(0..nprocs));
    let transitions = (0..rng.gen_range(1..=4))
        .map(|i| Transition {
            id: format!("t{i}"),
            from: modes[rng.gen_range(0..modes.len())].clone(),
            to: modes[rng.gen_range(0..modes.len())].clone(),
            guard: if rng.gen_bool(0.3) {
                Expr::tt()
            } else {
                g.boolean(rng, 1)
            },
            update: (0..rng.gen_range(1..=2)).map(|_| pick_proc(rng)).collect(),
            duration: rng.gen_range(0..=3),
        })
        .collect();
    let init = Init {
        mode: modes[0].clone(),
        predicate: if rng.gen_bool(0.5) {
            Expr::tt()
        } else {
            g.boolean(rng, 1)
        },
        procedures: if rng.gen_bool(0.3) {
            vec![pick_proc(rng)]
        } else {
            Vec::new()
        },
    };
    let m = PolyglotModel {
        name: "random".into(),
        modes: modes.clone(),
        terminal: Default::default(),
        vars: vars.clone(),
        init,
        transitions,
        procedures,
    };
    let pctx = m.property_context().unwrap();
    let pred = Gen::new(&pctx, false).boolean(rng, 2);
    let p = if rng.gen_bool(0.5) {
        Property::invariant(pred)
    } else {
        Property::eventually_within(rng.gen_range(0..=6), pred)
    };
    (m, p)
}

fn run_call(m: &PolyglotModel, name: &str, state: &Assignment) -> Vec<Assignment> {
    let p = m.procedure(name).unwrap();
    let mp = parse_mini(&p.source, &p.context(&m.vars)).unwrap();
    exec_mini(&mp, &state.project(&mp.ctx))
        .unwrap()
        .iter()
        .map(|post| {
            let mut full = state.clone();
            for (k, v) in post.iter() {
                full.set(k, v.clone());
            }
            full
        })
        .collect()
}

fn run_chain(m: &PolyglotModel, names: &[String], start: Assignment) -> Vec<Assignment> {
    let mut cur = vec![start];
    for n in names {
        let mut next: Vec<Assignment> = cur.iter().flat_map(|s| run_call(m, n, s)).collect();
        next.sort();
        next.dedup();
        cur = next;
    }
    cur
}

/// Explicit-state search for a violation of `p` within `k` transitions.
/// For `EventuallyWithin(T)` a violation is a path on which the predicate
/// is false at every step up to time T and which either passes time T or
/// ends with no enabled transition.
pub fn explicit_violation(m: &PolyglotModel, p: &Property, k: usize) -> bool {
    let layout = Layout::new(&m.vars);
    let mut frontier: BTreeSet<(String, Assignment, u64)> = BTreeSet::new();
    layout.for_each_state(|s| {
        let d = layout.from_flat(s);
        if eval_bool(&m.init.predicate, &d, None).unwrap() {
            for d2 in run_chain(m, &m.init.procedures, d) {
                frontier.insert((m.init.mode.clone(), d2, 0));
            }
        }
        true
    });
    for depth in 0..=k {
        let mut next = BTreeSet::new();
        for (mode, st, time) in &frontier {
            let sat = eval_bool(&p.predicate, &m.observe(mode, st), None).unwrap();
            let enabled: Vec<&Transition> = m
                .transitions
                .iter()
                .filter(|t| &t.from == mode && eval_bool(&t.guard, st, None).unwrap())
                .collect();
            match p.kind {
                PropertyKind::Invariant => {
                    if !sat {
                        return true;
                    }
                }
                PropertyKind::EventuallyWithin { time: bound } => {
                    if *time <= bound && sat {
                        continue;
                    }
                    if *time > bound || enabled.is_empty() {
                        return true;
                    }
                }
            }
            if depth < k {
                for t in enabled {
                    for d2 in run_chain(m, &t.update, st.clone()) {
                        next.insert((t.to.clone(), d2, time + t.duration));
                    }
                }
            }
        }
        frontier = next;
    }
    false
}

/// Whether every call of `t` is reproduced by concrete execution.
pub fn replays(m: &PolyglotModel, t: &Trace) -> bool {
    t.check(m).is_ok()
        && t.steps.iter().all(|s| {
            s.calls
                .iter()
                .all(|c| run_call(m, &c.procedure, &c.pre).contains(&c.post))
        })
        && match t.steps.first() {
            Some(s0) => {
                let start = s0.calls.first().map(|c| &c.pre).unwrap_or(&s0.state);
                eval_bool(&m.init.predicate, start, None).unwrap()
            }
            None => false,
        }
}

/// Contracts equal to the exact input/output relation of every procedure.
pub fn exact_contracts(m: &PolyglotModel) -> Option<BTreeMap<String, Contract>> {
    let mut out = BTreeMap::new();
    for (name, p) in &m.procedures {
        let mp = parse_mini(&p.source, &p.context(&m.vars)).unwrap();
        out.insert(
            name.clone(),
            Contract::new(Expr::tt(), strongest_post(&mp)?),
        );
    }
    Some(out)
}
