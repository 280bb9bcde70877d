//! Record flattening and a slot-indexed evaluator for hot loops.
//!
//! A [`Layout`] assigns one `u64` slot to every scalar leaf of a context
//! (record fields become `var.field` slots). [`scalarize`] rewrites an
//! expression so that it only mentions scalar leaves, which is also the shape
//! the SMT backend emits.

use super::expr::{BinOp, Expr, Position, Sign};
use super::types::{mask, to_signed, Assignment, SemType, Value, VarContext};
use super::IlError;

/// Name of the scalar leaf `var.f.g`.
pub fn leaf_name(var: &str, path: &[String]) -> String {
    let mut s = var.to_string();
    for p in path {
        s.push('.');
        s.push_str(p);
    }
    s
}

#[derive(Debug, Clone)]
pub struct Slot {
    pub var: String,
    pub path: Vec<String>,
    pub name: String,
    pub ty: SemType,
}

/// Flat slot layout of a context.
#[derive(Debug, Clone)]
pub struct Layout {
    ctx: VarContext,
    slots: Vec<Slot>,
}

impl Layout {
    pub fn new(ctx: &VarContext) -> Layout {
        let mut slots = Vec::new();
        for (var, ty) in ctx.iter() {
            for (path, leaf_ty) in ty.leaves() {
                slots.push(Slot {
                    var: var.to_string(),
                    name: leaf_name(var, &path),
                    path,
                    ty: leaf_ty,
                });
            }
        }
        Layout {
            ctx: ctx.clone(),
            slots,
        }
    }

    pub fn ctx(&self) -> &VarContext {
        &self.ctx
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn index_of(&self, leaf: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == leaf)
    }

    /// Total number of bits across all slots.
    pub fn total_bits(&self) -> u32 {
        self.slots.iter().map(|s| s.ty.width().unwrap_or(1)).sum()
    }

    pub fn to_flat(&self, a: &Assignment) -> Result<Vec<u64>, IlError> {
        self.slots
            .iter()
            .map(|s| {
                let mut v = a.get(&s.var).ok_or_else(|| {
                    IlError::NonConforming(format!("missing variable `{}`", s.var))
                })?;
                for p in &s.path {
                    v = v.field(p).ok_or_else(|| {
                        IlError::NonConforming(format!("missing field `{}`", s.name))
                    })?;
                }
                v.bits()
                    .ok_or_else(|| IlError::NonConforming(format!("`{}` is not scalar", s.name)))
            })
            .collect()
    }

    pub fn from_flat(&self, flat: &[u64]) -> Assignment {
        let mut it = self.slots.iter().zip(flat.iter().copied()).peekable();
        let mut values = std::collections::BTreeMap::new();
        for (var, ty) in self.ctx.iter() {
            values.insert(var.to_string(), build_value(ty, &mut it));
        }
        Assignment::from_map(values)
    }

    /// Calls `f` on every state of the domain in lexicographic slot order
    /// (last slot varies fastest). Stops early when `f` returns `false`.
    pub fn for_each_state(&self, mut f: impl FnMut(&[u64]) -> bool) {
        let maxes: Vec<u64> = self
            .slots
            .iter()
            .map(|s| mask(s.ty.width().unwrap_or(1)))
            .collect();
        let mut cur = vec![0u64; self.slots.len()];
        loop {
            if !f(&cur) {
                return;
            }
            let mut i = cur.len();
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                if cur[i] < maxes[i] {
                    cur[i] += 1;
                    break;
                }
                cur[i] = 0;
            }
        }
    }
}

fn build_value<'a>(ty: &SemType, it: &mut impl Iterator<Item = (&'a Slot, u64)>) -> Value {
    match ty {
        SemType::Record(fields) => Value::Record(
            fields
                .iter()
                .map(|(n, t)| (n.clone(), build_value(t, it)))
                .collect(),
        ),
        scalar => {
            let (_, bits) = it.next().expect("layout/assignment mismatch");
            Value::from_bits(scalar, bits)
        }
    }
}

/// Rewrites `e` so that it only references scalar leaves by their leaf
/// names; record equality becomes a field-wise conjunction.
pub fn scalarize(e: &Expr, ctx: &VarContext) -> Result<Expr, IlError> {
    let parts = lower(e, ctx)?;
    match parts.as_slice() {
        [(path, single)] if path.is_empty() => Ok(single.clone()),
        _ => Err(IlError::Type {
            subterm: e.to_string(),
            expected: "scalar".into(),
            found: "record".into(),
        }),
    }
}

type Parts = Vec<(Vec<String>, Expr)>;

fn leaf_refs(name: &str, ty: &SemType, old: bool) -> Parts {
    ty.leaves()
        .into_iter()
        .map(|(path, _)| {
            let leaf = leaf_name(name, &path);
            let e = if old {
                Expr::Old(leaf)
            } else {
                Expr::Var(leaf)
            };
            (path, e)
        })
        .collect()
}

fn scalar(e: Expr) -> Parts {
    vec![(Vec::new(), e)]
}

fn one(parts: Parts, whole: &Expr) -> Result<Expr, IlError> {
    match parts.len() {
        1 if parts[0].0.is_empty() => Ok(parts.into_iter().next().unwrap().1),
        _ => Err(IlError::Type {
            subterm: whole.to_string(),
            expected: "scalar".into(),
            found: "record".into(),
        }),
    }
}

fn lower(e: &Expr, ctx: &VarContext) -> Result<Parts, IlError> {
    Ok(match e {
        Expr::Bool(_) | Expr::Int { .. } => scalar(e.clone()),
        Expr::Var(n) | Expr::Old(n) => {
            let ty = ctx
                .get(n)
                .ok_or_else(|| IlError::UnknownVariable(n.clone()))?;
            leaf_refs(n, ty, matches!(e, Expr::Old(_)))
        }
        Expr::Select(inner, field) => {
            let parts = lower(inner, ctx)?;
            let picked: Parts = parts
                .into_iter()
                .filter(|(p, _)| p.first() == Some(field))
                .map(|(p, x)| (p[1..].to_vec(), x))
                .collect();
            if picked.is_empty() {
                return Err(IlError::Type {
                    subterm: e.to_string(),
                    expected: format!("record with field `{field}`"),
                    found: "other".into(),
                });
            }
            picked
        }
        Expr::Not(inner) => scalar(Expr::not(one(lower(inner, ctx)?, inner)?)),
        Expr::Bin(op @ (BinOp::Eq | BinOp::Neq), a, b) => {
            let pa = lower(a, ctx)?;
            let pb = lower(b, ctx)?;
            if pa.len() == 1 && pa[0].0.is_empty() {
                scalar(Expr::bin(*op, one(pa, a)?, one(pb, b)?))
            } else {
                let eqs = pa
                    .into_iter()
                    .zip(pb)
                    .map(|((_, x), (_, y))| Expr::eq(x, y));
                let all = Expr::conj(eqs);
                scalar(if *op == BinOp::Eq {
                    all
                } else {
                    Expr::not(all)
                })
            }
        }
        Expr::Bin(op, a, b) => scalar(Expr::bin(
            *op,
            one(lower(a, ctx)?, a)?,
            one(lower(b, ctx)?, b)?,
        )),
        Expr::Ite(c, t, f) => {
            let c = one(lower(c, ctx)?, c)?;
            let pt = lower(t, ctx)?;
            let pf = lower(f, ctx)?;
            pt.into_iter()
                .zip(pf)
                .map(|((path, x), (_, y))| (path, Expr::ite(c.clone(), x, y)))
                .collect()
        }
    })
}

/// Slot-resolved scalar expression.
#[derive(Debug, Clone)]
pub enum Node {
    Const(u64),
    Pre(usize),
    Post(usize),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Eq(Box<Node>, Box<Node>),
    Ult(Box<Node>, Box<Node>),
    Ule(Box<Node>, Box<Node>),
    Slt(Box<Node>, Box<Node>, u32),
    Sle(Box<Node>, Box<Node>, u32),
    Add(Box<Node>, Box<Node>, u64),
    Sub(Box<Node>, Box<Node>, u64),
    Mul(Box<Node>, Box<Node>, u64),
    Ite(Box<Node>, Box<Node>, Box<Node>),
}

impl Node {
    #[inline]
    pub fn eval(&self, pre: &[u64], post: &[u64]) -> u64 {
        match self {
            Node::Const(v) => *v,
            Node::Pre(i) => pre[*i],
            Node::Post(i) => post[*i],
            Node::Not(a) => 1 ^ a.eval(pre, post),
            Node::And(a, b) => (a.eval(pre, post) != 0 && b.eval(pre, post) != 0) as u64,
            Node::Or(a, b) => (a.eval(pre, post) != 0 || b.eval(pre, post) != 0) as u64,
            Node::Eq(a, b) => (a.eval(pre, post) == b.eval(pre, post)) as u64,
            Node::Ult(a, b) => (a.eval(pre, post) < b.eval(pre, post)) as u64,
            Node::Ule(a, b) => (a.eval(pre, post) <= b.eval(pre, post)) as u64,
            Node::Slt(a, b, w) => {
                (to_signed(a.eval(pre, post), *w) < to_signed(b.eval(pre, post), *w)) as u64
            }
            Node::Sle(a, b, w) => {
                (to_signed(a.eval(pre, post), *w) <= to_signed(b.eval(pre, post), *w)) as u64
            }
            Node::Add(a, b, m) => a.eval(pre, post).wrapping_add(b.eval(pre, post)) & m,
            Node::Sub(a, b, m) => a.eval(pre, post).wrapping_sub(b.eval(pre, post)) & m,
            Node::Mul(a, b, m) => a.eval(pre, post).wrapping_mul(b.eval(pre, post)) & m,
            Node::Ite(c, t, f) => {
                if c.eval(pre, post) != 0 {
                    t.eval(pre, post)
                } else {
                    f.eval(pre, post)
                }
            }
        }
    }

    #[inline]
    pub fn holds(&self, pre: &[u64], post: &[u64]) -> bool {
        self.eval(pre, post) != 0
    }
}

/// Compiles a well-typed expression against a layout. In `Pre` position
/// variables read the first state; in `Post` position they read the second
/// state and `old(..)` reads the first.
pub fn compile(e: &Expr, layout: &Layout, pos: Position) -> Result<Node, IlError> {
    let scalar = scalarize(e, layout.ctx())?;
    compile_scalar(&scalar, layout, pos)
}

fn width_of(e: &Expr, layout: &Layout) -> u32 {
    match e {
        Expr::Int { width, .. } => *width,
        Expr::Var(n) | Expr::Old(n) => layout
            .index_of(n)
            .and_then(|i| layout.slots()[i].ty.width())
            .unwrap_or(1),
        Expr::Bin(op, a, _) if op.is_arith() => width_of(a, layout),
        Expr::Ite(_, t, _) => width_of(t, layout),
        _ => 1,
    }
}

fn compile_scalar(e: &Expr, layout: &Layout, pos: Position) -> Result<Node, IlError> {
    let rec = |x: &Expr| compile_scalar(x, layout, pos).map(Box::new);
    let slot = |n: &str| {
        layout
            .index_of(n)
            .ok_or_else(|| IlError::UnknownVariable(n.to_string()))
    };
    Ok(match e {
        Expr::Bool(b) => Node::Const(*b as u64),
        Expr::Int { bits, .. } => Node::Const(*bits),
        Expr::Var(n) => match pos {
            Position::Pre => Node::Pre(slot(n)?),
            Position::Post => Node::Post(slot(n)?),
        },
        Expr::Old(n) => match pos {
            Position::Pre => return Err(IlError::OldInPrecondition),
            Position::Post => Node::Pre(slot(n)?),
        },
        Expr::Select(..) => unreachable!("scalarized"),
        Expr::Not(a) => Node::Not(rec(a)?),
        Expr::Bin(op, a, b) => {
            let w = width_of(a, layout);
            let m = mask(w);
            match op {
                BinOp::And => Node::And(rec(a)?, rec(b)?),
                BinOp::Or => Node::Or(rec(a)?, rec(b)?),
                BinOp::Implies => Node::Or(Box::new(Node::Not(rec(a)?)), rec(b)?),
                BinOp::Eq => Node::Eq(rec(a)?, rec(b)?),
                BinOp::Neq => Node::Not(Box::new(Node::Eq(rec(a)?, rec(b)?))),
                BinOp::Lt(Sign::Unsigned) => Node::Ult(rec(a)?, rec(b)?),
                BinOp::Le(Sign::Unsigned) => Node::Ule(rec(a)?, rec(b)?),
                BinOp::Gt(Sign::Unsigned) => Node::Ult(rec(b)?, rec(a)?),
                BinOp::Ge(Sign::Unsigned) => Node::Ule(rec(b)?, rec(a)?),
                BinOp::Lt(Sign::Signed) => Node::Slt(rec(a)?, rec(b)?, w),
                BinOp::Le(Sign::Signed) => Node::Sle(rec(a)?, rec(b)?, w),
                BinOp::Gt(Sign::Signed) => Node::Slt(rec(b)?, rec(a)?, w),
                BinOp::Ge(Sign::Signed) => Node::Sle(rec(b)?, rec(a)?, w),
                BinOp::Add => Node::Add(rec(a)?, rec(b)?, m),
                BinOp::Sub => Node::Sub(rec(a)?, rec(b)?, m),
                BinOp::Mul => Node::Mul(rec(a)?, rec(b)?, m),
            }
        }
        Expr::Ite(c, t, f) => Node::Ite(rec(c)?, rec(t)?, rec(f)?),
    })
}
