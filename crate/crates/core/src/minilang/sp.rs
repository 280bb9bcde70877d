//! Exact postconditions by symbolic execution.

use std::collections::{BTreeMap, BTreeSet};

use super::{LValue, MiniProc, Stmt};
use crate::il::flat::{leaf_name, scalarize};
use crate::il::{BinOp, Expr, SemType, Sign, VarContext};

const MAX_PATHS: usize = 256;

#[derive(Clone)]
struct Path {
    cond: Vec<Expr>,
    sym: BTreeMap<String, Expr>,
    havocked: BTreeSet<String>,
}

/// A post-position predicate `Q` such that `(true, Q)` is exactly the
/// relation of `p`. `None` when a havocked value is overwritten later on
/// some path (that would need an existential) or the path count explodes.
pub fn strongest_post(p: &MiniProc) -> Option<Expr> {
    let ctx = &p.ctx;
    let mut sym = BTreeMap::new();
    let mut types = BTreeMap::new();
    for (var, ty) in ctx.iter() {
        for (path, leaf_ty) in ty.leaves() {
            let name = leaf_name(var, &path);
            sym.insert(name.clone(), Expr::Old(name.clone()));
            types.insert(name, leaf_ty);
        }
    }
    let start = Path {
        cond: Vec::new(),
        sym,
        havocked: BTreeSet::new(),
    };
    let paths = exec(&p.body, vec![start], ctx, &types)?;
    let disjuncts: Vec<Expr> = paths
        .into_iter()
        .map(|path| {
            let mut parts = path.cond;
            for (leaf, value) in &path.sym {
                if !path.havocked.contains(leaf) {
                    parts.push(Expr::eq(Expr::Var(leaf.clone()), value.clone()));
                }
            }
            Expr::conj(parts)
        })
        .collect();
    let q = disjuncts
        .into_iter()
        .reduce(Expr::or)
        .unwrap_or_else(Expr::ff);
    Some(unflatten(&q))
}

fn substitute(e: &Expr, sym: &BTreeMap<String, Expr>) -> Expr {
    e.map_vars(&|x| match x {
        Expr::Var(n) => sym.get(n).cloned(),
        _ => None,
    })
}

fn leaves_of(lv: &LValue, ctx: &VarContext) -> Option<Vec<(String, Vec<String>)>> {
    let ty = lv.sem_type(ctx).ok()?;
    Some(
        ty.leaves()
            .into_iter()
            .map(|(rest, _)| {
                let mut full = lv.path.clone();
                full.extend(rest.iter().cloned());
                (leaf_name(&lv.var, &full), rest)
            })
            .collect(),
    )
}

fn exec(
    body: &[Stmt],
    mut paths: Vec<Path>,
    ctx: &VarContext,
    types: &BTreeMap<String, SemType>,
) -> Option<Vec<Path>> {
    for s in body {
        match s {
            Stmt::Assign(lv, rhs) => {
                let leaves = leaves_of(lv, ctx)?;
                let values: Vec<(String, Expr)> = leaves
                    .into_iter()
                    .map(|(leaf, rest)| {
                        let mut e = rhs.clone();
                        for f in &rest {
                            e = e.select(f);
                        }
                        scalarize(&e, ctx).ok().map(|e| (leaf, e))
                    })
                    .collect::<Option<_>>()?;
                for path in paths.iter_mut() {
                    let new: Vec<(String, Expr)> = values
                        .iter()
                        .map(|(l, e)| (l.clone(), substitute(e, &path.sym)))
                        .collect();
                    for (leaf, value) in new {
                        if path.havocked.contains(&leaf) {
                            return None;
                        }
                        path.sym.insert(leaf, value);
                    }
                }
            }
            Stmt::Havoc(lv, range) => {
                for (leaf, _) in leaves_of(lv, ctx)? {
                    let ty = types.get(&leaf)?;
                    for path in paths.iter_mut() {
                        if !path.havocked.insert(leaf.clone()) {
                            return None;
                        }
                        path.sym.insert(leaf.clone(), Expr::Var(leaf.clone()));
                        if let Some((lo, hi)) = range {
                            let sign = if ty.is_signed() {
                                Sign::Signed
                            } else {
                                Sign::Unsigned
                            };
                            let v = Expr::Var(leaf.clone());
                            path.cond
                                .push(Expr::bin(BinOp::Le(sign), lo.clone(), v.clone()));
                            path.cond.push(Expr::bin(BinOp::Le(sign), v, hi.clone()));
                        }
                    }
                }
            }
            Stmt::If(c, t, f) => {
                let c = scalarize(c, ctx).ok()?;
                let mut yes = Vec::new();
                let mut no = Vec::new();
                for path in paths {
                    let cond = substitute(&c, &path.sym);
                    let mut a = path.clone();
                    a.cond.push(cond.clone());
                    yes.push(a);
                    let mut b = path;
                    b.cond.push(Expr::not(cond));
                    no.push(b);
                }
                let mut out = exec(t, yes, ctx, types)?;
                out.extend(exec(f, no, ctx, types)?);
                paths = out;
            }
        }
        if paths.len() > MAX_PATHS {
            return None;
        }
    }
    Some(paths)
}

/// Turns leaf names `a.b` back into selects on `a`.
fn unflatten(e: &Expr) -> Expr {
    let rebuild = |name: &str, old: bool| {
        let mut parts = name.split('.');
        let head = parts.next().unwrap_or(name);
        let mut out = if old {
            Expr::old(head)
        } else {
            Expr::var(head)
        };
        for f in parts {
            out = out.select(f);
        }
        out
    };
    e.map_vars(&|x| match x {
        Expr::Var(n) if n.contains('.') => Some(rebuild(n, false)),
        Expr::Old(n) if n.contains('.') => Some(rebuild(n, true)),
        _ => None,
    })
}
