//! Relational execution and the brute-force Hoare-triple oracle.

use std::collections::BTreeSet;

use super::{LValue, MiniError, MiniProc, Stmt, MAX_DOMAIN_BITS};
use crate::example::ExamplePair;
use crate::il::flat::{compile, leaf_name, Layout, Node};
use crate::il::{mask, to_signed, Assignment, Contract, Expr, Position, SemType};

/// Default cap on the number of post-states one execution may enumerate.
pub const DEFAULT_STATE_CAP: usize = 1 << 16;

#[derive(Debug, Clone)]
enum Op {
    /// Simultaneous assignment of several slots (one source-level statement).
    Set(Vec<(usize, Node)>),
    Havoc {
        slot: usize,
        lo: i128,
        hi: i128,
        mask: u64,
    },
    If(Node, Vec<Op>, Vec<Op>),
}

/// A procedure compiled against a flat layout.
#[derive(Debug, Clone)]
pub struct Program {
    layout: Layout,
    ops: Vec<Op>,
}

fn select_path(mut e: Expr, path: &[String]) -> Expr {
    for f in path {
        e = e.select(f);
    }
    e
}

fn full_range(ty: &SemType) -> (i128, i128) {
    match ty {
        SemType::Bool => (0, 1),
        SemType::UInt(w) => (0, mask(*w) as i128),
        SemType::SInt(w) => (-(1i128 << (w - 1)), (1i128 << (w - 1)) - 1),
        SemType::Record(_) => unreachable!("records are havocked leaf by leaf"),
    }
}

fn literal_value(e: &Expr) -> i128 {
    match e {
        Expr::Int {
            bits,
            signed: true,
            width,
        } => to_signed(*bits, *width) as i128,
        Expr::Int { bits, .. } => *bits as i128,
        _ => unreachable!("havoc bounds are literals"),
    }
}

impl Program {
    pub fn compile(p: &MiniProc, layout: &Layout) -> Result<Program, MiniError> {
        let ops = compile_body(&p.body, layout)?;
        Ok(Program {
            layout: layout.clone(),
            ops,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// All post-states reachable from `state`, sorted and deduplicated.
    pub fn exec_flat(&self, state: &[u64], cap: usize) -> Result<Vec<Vec<u64>>, MiniError> {
        let mut out = run(&self.ops, vec![state.to_vec()], cap)?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

fn leaf_slots(
    lv: &LValue,
    layout: &Layout,
) -> Result<Vec<(usize, Vec<String>, SemType)>, MiniError> {
    let ty = lv.sem_type(layout.ctx())?;
    ty.leaves()
        .into_iter()
        .map(|(rest, leaf_ty)| {
            let mut full = lv.path.clone();
            full.extend(rest.iter().cloned());
            let name = leaf_name(&lv.var, &full);
            let slot = layout
                .index_of(&name)
                .ok_or(MiniError::NotAssignable(name))?;
            Ok((slot, rest, leaf_ty))
        })
        .collect()
}

fn compile_body(body: &[Stmt], layout: &Layout) -> Result<Vec<Op>, MiniError> {
    let mut ops = Vec::new();
    for s in body {
        match s {
            Stmt::Assign(lv, rhs) => {
                let mut sets = Vec::new();
                for (slot, rest, _) in leaf_slots(lv, layout)? {
                    sets.push((
                        slot,
                        compile(&select_path(rhs.clone(), &rest), layout, Position::Pre)?,
                    ));
                }
                ops.push(Op::Set(sets));
            }
            Stmt::Havoc(lv, range) => {
                for (slot, _, ty) in leaf_slots(lv, layout)? {
                    let (lo, hi) = match range {
                        Some((lo, hi)) => (literal_value(lo), literal_value(hi)),
                        None => full_range(&ty),
                    };
                    if lo > hi {
                        return Err(MiniError::EmptyRange(lv.to_string()));
                    }
                    ops.push(Op::Havoc {
                        slot,
                        lo,
                        hi,
                        mask: mask(ty.width().unwrap_or(1)),
                    });
                }
            }
            Stmt::If(c, t, f) => ops.push(Op::If(
                compile(c, layout, Position::Pre)?,
                compile_body(t, layout)?,
                compile_body(f, layout)?,
            )),
        }
    }
    Ok(ops)
}

fn run(ops: &[Op], mut states: Vec<Vec<u64>>, cap: usize) -> Result<Vec<Vec<u64>>, MiniError> {
    for op in ops {
        match op {
            Op::Set(sets) => {
                for s in states.iter_mut() {
                    let vals: Vec<u64> = sets.iter().map(|(_, n)| n.eval(s, s)).collect();
                    for ((slot, _), v) in sets.iter().zip(vals) {
                        s[*slot] = v;
                    }
                }
            }
            Op::Havoc { slot, lo, hi, mask } => {
                let width = (hi - lo + 1) as u128;
                if (states.len() as u128).saturating_mul(width) > cap as u128 {
                    return Err(MiniError::RangeTooLarge { cap });
                }
                let mut next = Vec::with_capacity(states.len() * width as usize);
                for s in &states {
                    for v in *lo..=*hi {
                        let mut t = s.clone();
                        t[*slot] = (v as i64 as u64) & mask;
                        next.push(t);
                    }
                }
                next.sort_unstable();
                next.dedup();
                states = next;
            }
            Op::If(c, t, f) => {
                let (yes, no): (Vec<_>, Vec<_>) = states.into_iter().partition(|s| c.holds(s, s));
                let mut out = if yes.is_empty() {
                    yes
                } else {
                    run(t, yes, cap)?
                };
                if !no.is_empty() {
                    out.extend(run(f, no, cap)?);
                }
                states = out;
            }
        }
    }
    Ok(states)
}

/// A finite set of assignments.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StateSet(pub BTreeSet<Assignment>);

impl StateSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, a: &Assignment) -> bool {
        self.0.contains(a)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Assignment> {
        self.0.iter()
    }
}

/// Every post-state of `p` from `d`, enumerating havocs up to `cap` states.
pub fn exec_mini(p: &MiniProc, d: &Assignment) -> Result<StateSet, MiniError> {
    exec_mini_capped(p, d, DEFAULT_STATE_CAP)
}

pub fn exec_mini_capped(p: &MiniProc, d: &Assignment, cap: usize) -> Result<StateSet, MiniError> {
    d.check(&p.ctx)?;
    let layout = Layout::new(&p.ctx);
    let prog = Program::compile(p, &layout)?;
    let flat = layout.to_flat(d)?;
    let posts = prog.exec_flat(&flat, cap)?;
    Ok(StateSet(
        posts.iter().map(|s| layout.from_flat(s)).collect(),
    ))
}

/// Whether `p` can map `pre` to `post`.
pub fn pair_reproducible(
    p: &MiniProc,
    pre: &Assignment,
    post: &Assignment,
) -> Result<bool, MiniError> {
    post.check(&p.ctx)?;
    Ok(exec_mini(p, pre)?.contains(post))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BruteResult {
    Pass,
    /// A concrete behavior of the procedure the contract does not admit.
    Fail(ExamplePair),
}

fn check_domain(layout: &Layout, width_cap: u32) -> Result<(), MiniError> {
    for s in layout.slots() {
        let w = s.ty.width().unwrap_or(1);
        if w > width_cap {
            return Err(MiniError::DomainTooLarge {
                reason: format!("`{}` has width {w} > cap {width_cap}", s.name),
            });
        }
    }
    let bits = layout.total_bits();
    if bits > MAX_DOMAIN_BITS {
        return Err(MiniError::DomainTooLarge {
            reason: format!("{bits} state bits > {MAX_DOMAIN_BITS}"),
        });
    }
    Ok(())
}

/// Decides `{pre} p {post}` by enumerating the procedure's whole domain.
pub fn brute_verify(c: &Contract, p: &MiniProc, width_cap: u32) -> Result<BruteResult, MiniError> {
    c.typecheck(&p.ctx)?;
    let layout = Layout::new(&p.ctx);
    check_domain(&layout, width_cap)?;
    let prog = Program::compile(p, &layout)?;
    let pre = compile(&c.pre, &layout, Position::Pre)?;
    let post = compile(&c.post, &layout, Position::Post)?;
    let mut outcome: Result<BruteResult, MiniError> = Ok(BruteResult::Pass);
    layout.for_each_state(|d| {
        if !pre.holds(d, d) {
            return true;
        }
        match prog.exec_flat(d, DEFAULT_STATE_CAP) {
            Ok(posts) => match posts.iter().find(|q| !post.holds(d, q)) {
                Some(q) => {
                    outcome = Ok(BruteResult::Fail(ExamplePair::positive(
                        layout.from_flat(d),
                        layout.from_flat(q),
                    )));
                    false
                }
                None => true,
            },
            Err(e) => {
                outcome = Err(e);
                false
            }
        }
    });
    outcome
}
