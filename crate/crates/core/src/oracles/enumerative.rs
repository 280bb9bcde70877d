//! Bottom-up enumerative synthesis of contracts from examples.
//!
//! Expressions are grown by size in typed banks. Two expressions with the
//! same values on every example point are interchangeable for the PBE
//! constraint, so only the first (smallest) one is kept. The precondition
//! bank ranges over example pre-states; the postcondition bank ranges over
//! example pairs, with `old(v)` reading the pre-state.
//!
//! Candidates are tried in nondecreasing total size `|P| + |Q|`, with
//! `P = true` first at every size.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::rc::Rc;
use std::time::Instant;

use super::{consistent, OracleError, ProcedureRef, SynthBudget, SynthQuery, Synthesizer};
use crate::example::ExamplePair;
use crate::il::flat::Layout;
use crate::il::{mask, to_signed, BinOp, Contract, Expr, SemType, Sign};

/// Largest precondition considered.
const MAX_PRE_SIZE: usize = 7;
/// Largest integer-valued subterm.
const MAX_INT_SIZE: usize = 7;
const MAX_TOTAL_SIZE: usize = 40;

#[derive(Debug, Clone)]
pub struct EnumSynthesizer {
    /// Distinct values per type harvested from examples.
    pub example_constants: usize,
}

impl Default for EnumSynthesizer {
    fn default() -> EnumSynthesizer {
        EnumSynthesizer {
            example_constants: 8,
        }
    }
}

struct Entry {
    expr: Expr,
    vals: Rc<[u64]>,
    depth: usize,
}

struct TypedBank {
    ty: SemType,
    by_size: Vec<Vec<Entry>>,
    seen: HashSet<Rc<[u64]>>,
}

struct Bank {
    /// Index 0 is Bool; the rest are the integer types in first-use order.
    types: Vec<TypedBank>,
    built: usize,
    max_depth: usize,
}

struct Meter {
    generated: usize,
    max: usize,
    start: Instant,
    budget: SynthBudget,
}

impl Meter {
    fn tick(&mut self) -> Result<(), OracleError> {
        self.generated += 1;
        if self.generated > self.max {
            return Err(OracleError::NoCandidate(format!(
                "candidate budget of {} exhausted",
                self.max
            )));
        }
        if self.generated.is_multiple_of(4096) && self.start.elapsed() > self.budget.wall_clock {
            return Err(OracleError::NoCandidate(
                "wall-clock budget exhausted".into(),
            ));
        }
        Ok(())
    }
}

/// Entries of one size under construction, deduplicated against the bank.
struct Fresh<'b> {
    bank: &'b [TypedBank],
    max_depth: usize,
    out: Vec<Vec<Entry>>,
    seen: Vec<HashSet<Rc<[u64]>>>,
}

impl Fresh<'_> {
    fn push(
        &mut self,
        ti: usize,
        vals: Vec<u64>,
        depth: usize,
        meter: &mut Meter,
        mk: impl FnOnce() -> Expr,
    ) -> Result<(), OracleError> {
        meter.tick()?;
        if depth > self.max_depth
            || self.bank[ti].seen.contains(vals.as_slice())
            || self.seen[ti].contains(vals.as_slice())
        {
            return Ok(());
        }
        let vals: Rc<[u64]> = vals.into();
        self.seen[ti].insert(vals.clone());
        self.out[ti].push(Entry {
            expr: mk(),
            vals,
            depth,
        });
        Ok(())
    }
}

fn binop_vals(op: BinOp, ty: &SemType, a: &[u64], b: &[u64]) -> Vec<u64> {
    let w = ty.width().unwrap_or(1);
    let m = mask(w);
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match op {
            BinOp::And => x & y,
            BinOp::Or => x | y,
            BinOp::Eq => (x == y) as u64,
            BinOp::Add => x.wrapping_add(y) & m,
            BinOp::Sub => x.wrapping_sub(y) & m,
            BinOp::Lt(Sign::Unsigned) => (x < y) as u64,
            BinOp::Le(Sign::Unsigned) => (x <= y) as u64,
            BinOp::Lt(Sign::Signed) => (to_signed(x, w) < to_signed(y, w)) as u64,
            BinOp::Le(Sign::Signed) => (to_signed(x, w) <= to_signed(y, w)) as u64,
            _ => unreachable!("operator outside the grammar"),
        })
        .collect()
}

impl Bank {
    fn new(int_types: &[SemType], max_depth: usize) -> Bank {
        let mut types = vec![TypedBank {
            ty: SemType::Bool,
            by_size: vec![Vec::new()],
            seen: HashSet::new(),
        }];
        for ty in int_types {
            types.push(TypedBank {
                ty: ty.clone(),
                by_size: vec![Vec::new()],
                seen: HashSet::new(),
            });
        }
        Bank {
            types,
            built: 0,
            max_depth,
        }
    }

    fn index_of(&self, ty: &SemType) -> Option<usize> {
        self.types.iter().position(|t| &t.ty == ty)
    }

    fn seed(
        &mut self,
        terminals: Vec<(SemType, Expr, Vec<u64>)>,
        meter: &mut Meter,
    ) -> Result<(), OracleError> {
        for (ty, e, vals) in terminals {
            meter.tick()?;
            let Some(ti) = self.index_of(&ty) else {
                continue;
            };
            let tb = &mut self.types[ti];
            if tb.seen.contains(vals.as_slice()) {
                continue;
            }
            let vals: Rc<[u64]> = vals.into();
            tb.seen.insert(vals.clone());
            while tb.by_size.len() <= 1 {
                tb.by_size.push(Vec::new());
            }
            tb.by_size[1].push(Entry {
                expr: e,
                vals,
                depth: 1,
            });
        }
        self.built = 1;
        Ok(())
    }

    fn entries(&self, ti: usize, size: usize) -> &[Entry] {
        self.types[ti]
            .by_size
            .get(size)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Adds all entries of size `s`, given every smaller size is built.
    fn grow(&mut self, s: usize, meter: &mut Meter) -> Result<(), OracleError> {
        let n = self.types.len();
        let mut fresh = Fresh {
            bank: &self.types,
            max_depth: self.max_depth,
            out: (0..n).map(|_| Vec::new()).collect(),
            seen: (0..n).map(|_| HashSet::new()).collect(),
        };
        // Bool results.
        for a in self.entries(0, s - 1) {
            fresh.push(
                0,
                a.vals.iter().map(|x| x ^ 1).collect(),
                a.depth + 1,
                meter,
                || Expr::not(a.expr.clone()),
            )?;
        }
        for i in 1..s - 1 {
            let j = s - 1 - i;
            if i > j {
                break;
            }
            for (ai, a) in self.entries(0, i).iter().enumerate() {
                let bs = self.entries(0, j);
                let start = if i == j { ai + 1 } else { 0 };
                for b in &bs[start.min(bs.len())..] {
                    let d = a.depth.max(b.depth) + 1;
                    for op in [BinOp::And, BinOp::Or, BinOp::Eq] {
                        let v = binop_vals(op, &SemType::Bool, &a.vals, &b.vals);
                        fresh.push(0, v, d, meter, || {
                            Expr::bin(op, a.expr.clone(), b.expr.clone())
                        })?;
                    }
                }
            }
        }
        for ti in 1..n {
            let ty = self.types[ti].ty.clone();
            let sign = if ty.is_signed() {
                Sign::Signed
            } else {
                Sign::Unsigned
            };
            for i in 1..s - 1 {
                let j = s - 1 - i;
                for (ai, a) in self.entries(ti, i).iter().enumerate() {
                    for (bi, b) in self.entries(ti, j).iter().enumerate() {
                        let d = a.depth.max(b.depth) + 1;
                        let ordered = i < j || (i == j && ai < bi);
                        if ordered {
                            let v = binop_vals(BinOp::Eq, &ty, &a.vals, &b.vals);
                            fresh.push(0, v, d, meter, || {
                                Expr::eq(a.expr.clone(), b.expr.clone())
                            })?;
                        }
                        if ai != bi || i != j {
                            for op in [BinOp::Lt(sign), BinOp::Le(sign)] {
                                let v = binop_vals(op, &ty, &a.vals, &b.vals);
                                fresh.push(0, v, d, meter, || {
                                    Expr::bin(op, a.expr.clone(), b.expr.clone())
                                })?;
                            }
                        }
                        if s <= MAX_INT_SIZE {
                            if i < j || (i == j && ai <= bi) {
                                let v = binop_vals(BinOp::Add, &ty, &a.vals, &b.vals);
                                fresh.push(ti, v, d, meter, || {
                                    Expr::add(a.expr.clone(), b.expr.clone())
                                })?;
                            }
                            if ai != bi || i != j {
                                let v = binop_vals(BinOp::Sub, &ty, &a.vals, &b.vals);
                                fresh.push(ti, v, d, meter, || {
                                    Expr::bin(BinOp::Sub, a.expr.clone(), b.expr.clone())
                                })?;
                            }
                        }
                    }
                }
            }
            if s <= MAX_INT_SIZE {
                for ci in 1..s - 2 {
                    for ti_size in 1..s - 1 - ci {
                        let ei_size = s - 1 - ci - ti_size;
                        for c in self.entries(0, ci) {
                            for t in self.entries(ti, ti_size) {
                                for e in self.entries(ti, ei_size) {
                                    let vals = c
                                        .vals
                                        .iter()
                                        .zip(t.vals.iter())
                                        .zip(e.vals.iter())
                                        .map(|((c, t), e)| if *c == 1 { *t } else { *e })
                                        .collect();
                                    let d = c.depth.max(t.depth).max(e.depth) + 1;
                                    fresh.push(ti, vals, d, meter, || {
                                        Expr::ite(c.expr.clone(), t.expr.clone(), e.expr.clone())
                                    })?;
                                }
                            }
                        }
                    }
                }
            }
        }
        let Fresh { out, seen, .. } = fresh;
        for ((tb, entries), seen) in self.types.iter_mut().zip(out).zip(seen) {
            while tb.by_size.len() <= s {
                tb.by_size.push(Vec::new());
            }
            tb.by_size[s] = entries;
            tb.seen.extend(seen);
        }
        self.built = s;
        Ok(())
    }

    fn build_to(&mut self, s: usize, meter: &mut Meter) -> Result<(), OracleError> {
        while self.built < s {
            let next = self.built + 1;
            self.grow(next, meter)?;
        }
        Ok(())
    }
}

/// Integer literals appearing in procedure text (decimal or `0x` hex).
fn mined_numbers(text: &str) -> BTreeSet<u64> {
    let bytes = text.as_bytes();
    let mut out = BTreeSet::new();
    let mut i = 0;
    while i < bytes.len() {
        let boundary = i == 0 || !(bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_');
        if boundary && bytes[i].is_ascii_digit() {
            let (radix, start) =
                if bytes[i] == b'0' && matches!(bytes.get(i + 1), Some(b'x' | b'X')) {
                    (16, i + 2)
                } else {
                    (10, i)
                };
            let mut j = start;
            while j < bytes.len() && (bytes[j] as char).is_digit(radix) {
                j += 1;
            }
            if let Ok(v) = u64::from_str_radix(&text[start..j], radix) {
                out.insert(v);
            }
            i = j.max(i + 1);
        } else {
            i += 1;
        }
    }
    out
}

struct Problem {
    layout: Layout,
    pos: Vec<FlatPair>,
    neg: Vec<FlatPair>,
    /// Distinct pre-states, and the pre-state index of every pair (pos then neg).
    pres: Vec<Vec<u64>>,
    pre_of: Vec<usize>,
}

/// Pre and post states in layout order.
type FlatPair = (Vec<u64>, Vec<u64>);

impl Problem {
    fn new(f: &ProcedureRef, q: &SynthQuery<'_>) -> Result<Problem, OracleError> {
        let layout = Layout::new(&f.ctx);
        let flat = |xs: &[ExamplePair]| -> Result<Vec<FlatPair>, OracleError> {
            xs.iter()
                .map(|x| Ok((layout.to_flat(&x.pre)?, layout.to_flat(&x.post)?)))
                .collect()
        };
        let pos = flat(q.positive)?;
        let neg = flat(q.negative)?;
        let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut pres = Vec::new();
        let mut pre_of = Vec::new();
        for (d, _) in pos.iter().chain(&neg) {
            let k = *index.entry(d.clone()).or_insert_with(|| {
                pres.push(d.clone());
                pres.len() - 1
            });
            pre_of.push(k);
        }
        Ok(Problem {
            layout,
            pos,
            neg,
            pres,
            pre_of,
        })
    }

    fn pairs(&self) -> impl Iterator<Item = &(Vec<u64>, Vec<u64>)> {
        self.pos.iter().chain(&self.neg)
    }

    fn leaf_exprs(&self) -> Vec<(SemType, Expr, Expr, usize)> {
        self.layout
            .slots()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut cur = Expr::var(&s.var);
                let mut old = Expr::old(&s.var);
                for f in &s.path {
                    cur = cur.select(f);
                    old = old.select(f);
                }
                (s.ty.clone(), cur, old, i)
            })
            .collect()
    }

    fn int_types(&self) -> Vec<SemType> {
        let mut out: Vec<SemType> = Vec::new();
        for s in self.layout.slots() {
            if s.ty.is_int() && !out.contains(&s.ty) {
                out.push(s.ty.clone());
            }
        }
        out
    }

    fn constants(&self, ty: &SemType, source: &str, from_examples: usize) -> Vec<u64> {
        let m = mask(ty.width().unwrap_or(1));
        let mut out: Vec<u64> = vec![0, 1];
        for v in mined_numbers(source) {
            if v <= m && !out.contains(&v) {
                out.push(v);
            }
        }
        let mut extra = Vec::new();
        for (d, d2) in self.pairs() {
            for (i, s) in self.layout.slots().iter().enumerate() {
                if &s.ty != ty {
                    continue;
                }
                for v in [d[i], d2[i]] {
                    if !out.contains(&v) && !extra.contains(&v) && extra.len() < from_examples {
                        extra.push(v);
                    }
                }
            }
        }
        out.extend(extra);
        out
    }
}

fn literal(ty: &SemType, bits: u64) -> Expr {
    match ty {
        SemType::Bool => Expr::Bool(bits == 1),
        _ => Expr::int_of(ty, bits),
    }
}

impl EnumSynthesizer {
    fn run(
        &self,
        f: &ProcedureRef,
        q: &SynthQuery<'_>,
        b: &SynthBudget,
    ) -> Result<Contract, OracleError> {
        for x in q.positive.iter().chain(q.negative) {
            x.check(&f.ctx)?;
        }
        if let Some(x) = q
            .negative
            .iter()
            .find(|n| q.positive.iter().any(|p| p.same_states(n)))
        {
            return Err(OracleError::NoCandidate(format!(
                "contradictory examples: {x} is both positive and negative"
            )));
        }
        let prob = Problem::new(f, q)?;
        let int_types = prob.int_types();
        let mut meter = Meter {
            generated: 0,
            max: b.max_candidates,
            start: Instant::now(),
            budget: b.clone(),
        };

        let mut consts = Vec::new();
        for ty in &int_types {
            for v in prob.constants(ty, &f.procedure.source, self.example_constants) {
                consts.push((ty.clone(), v));
            }
        }

        let n_pairs = prob.pos.len() + prob.neg.len();
        let mut pre_terms = vec![
            (SemType::Bool, Expr::tt(), vec![1; prob.pres.len()]),
            (SemType::Bool, Expr::ff(), vec![0; prob.pres.len()]),
        ];
        let mut post_terms = vec![
            (SemType::Bool, Expr::tt(), vec![1; n_pairs]),
            (SemType::Bool, Expr::ff(), vec![0; n_pairs]),
        ];
        let leaves = prob.leaf_exprs();
        for (ty, _, old, i) in &leaves {
            post_terms.push((
                ty.clone(),
                old.clone(),
                prob.pairs().map(|(d, _)| d[*i]).collect(),
            ));
        }
        for (ty, cur, _, i) in &leaves {
            pre_terms.push((
                ty.clone(),
                cur.clone(),
                prob.pres.iter().map(|d| d[*i]).collect(),
            ));
            post_terms.push((
                ty.clone(),
                cur.clone(),
                prob.pairs().map(|(_, d2)| d2[*i]).collect(),
            ));
        }
        for (ty, v) in &consts {
            pre_terms.push((ty.clone(), literal(ty, *v), vec![*v; prob.pres.len()]));
            post_terms.push((ty.clone(), literal(ty, *v), vec![*v; n_pairs]));
        }

        let mut pbank = Bank::new(&int_types, b.max_depth);
        let mut qbank = Bank::new(&int_types, b.max_depth);
        pbank.seed(pre_terms, &mut meter)?;
        qbank.seed(post_terms, &mut meter)?;

        let npos = prob.pos.len();
        let neg_pres: Vec<usize> = prob.pre_of[npos..].to_vec();
        let full_want: Vec<u64> = (0..n_pairs).map(|i| (i < npos) as u64).collect();

        let accept = |p: &Expr, qe: &Expr| -> Option<Contract> {
            let c = Contract::new(p.clone(), qe.clone());
            (!q.excluded.contains(&c)).then_some(c)
        };

        for total in 2..=MAX_TOTAL_SIZE {
            qbank.build_to(total - 1, &mut meter)?;
            for entry in qbank.entries(0, total - 1) {
                if entry.vals[..] == full_want[..] {
                    if let Some(c) = accept(&Expr::tt(), &entry.expr) {
                        return Ok(c);
                    }
                }
            }
            let max_p = (total - 1).min(MAX_PRE_SIZE);
            pbank.build_to(max_p, &mut meter)?;
            for sp in 1..=max_p {
                let sq = total - sp;
                for p in pbank.entries(0, sp) {
                    if p.expr == Expr::tt() || neg_pres.iter().any(|&k| p.vals[k] == 0) {
                        continue;
                    }
                    // Positives outside P impose nothing on Q.
                    let care: Vec<bool> = (0..n_pairs)
                        .map(|i| i >= npos || p.vals[prob.pre_of[i]] == 1)
                        .collect();
                    for qe in qbank.entries(0, sq) {
                        let ok = (0..n_pairs).all(|i| !care[i] || qe.vals[i] == full_want[i]);
                        if ok {
                            if let Some(c) = accept(&p.expr, &qe.expr) {
                                return Ok(c);
                            }
                        }
                    }
                }
            }
        }
        Err(OracleError::NoCandidate(format!(
            "no contract up to size {MAX_TOTAL_SIZE}"
        )))
    }
}

impl Synthesizer for EnumSynthesizer {
    fn name(&self) -> &str {
        "enum"
    }

    fn synthesize(
        &self,
        f: &ProcedureRef,
        q: &SynthQuery<'_>,
        b: &SynthBudget,
    ) -> Result<Contract, OracleError> {
        let c = self.run(f, q, b)?;
        debug_assert!(consistent(&c, q.positive, q.negative).unwrap_or(false));
        Ok(c)
    }
}
