use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::types::SemType;

/// Signedness of a comparator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Unsigned,
    Signed,
}

impl Sign {
    pub fn suffix(self) -> &'static str {
        match self {
            Sign::Unsigned => "u",
            Sign::Signed => "s",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    And,
    Or,
    Implies,
    Eq,
    Neq,
    Lt(Sign),
    Le(Sign),
    Gt(Sign),
    Ge(Sign),
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Implies)
    }

    pub fn is_ordering(self) -> bool {
        matches!(
            self,
            BinOp::Lt(_) | BinOp::Le(_) | BinOp::Gt(_) | BinOp::Ge(_)
        )
    }

    pub fn is_arith(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul)
    }

    pub fn sign(self) -> Option<Sign> {
        match self {
            BinOp::Lt(s) | BinOp::Le(s) | BinOp::Gt(s) | BinOp::Ge(s) => Some(s),
            _ => None,
        }
    }

    /// Concrete-syntax token.
    pub fn symbol(self) -> String {
        match self {
            BinOp::And => "&&".into(),
            BinOp::Or => "||".into(),
            BinOp::Implies => "==>".into(),
            BinOp::Eq => "==".into(),
            BinOp::Neq => "!=".into(),
            BinOp::Lt(s) => format!("<{}", s.suffix()),
            BinOp::Le(s) => format!("<={}", s.suffix()),
            BinOp::Gt(s) => format!(">{}", s.suffix()),
            BinOp::Ge(s) => format!(">={}", s.suffix()),
            BinOp::Add => "+".into(),
            BinOp::Sub => "-".into(),
            BinOp::Mul => "*".into(),
        }
    }
}

/// Whether an expression sits in a precondition/guard or in a postcondition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Position {
    Pre,
    Post,
}

/// Typed IL expression. Integer literals carry their type; all other
/// types are determined by the variable context.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Expr {
    Bool(bool),
    /// Raw `width`-bit pattern plus signedness.
    Int {
        bits: u64,
        signed: bool,
        width: u32,
    },
    Var(String),
    Old(String),
    Select(Box<Expr>, String),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn tt() -> Expr {
        Expr::Bool(true)
    }

    pub fn ff() -> Expr {
        Expr::Bool(false)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn old(name: &str) -> Expr {
        Expr::Old(name.to_string())
    }

    pub fn uint(value: u64, width: u32) -> Expr {
        Expr::Int {
            bits: value & super::types::mask(width),
            signed: false,
            width,
        }
    }

    pub fn sint(value: i64, width: u32) -> Expr {
        Expr::Int {
            bits: (value as u64) & super::types::mask(width),
            signed: true,
            width,
        }
    }

    /// Integer literal of an integer type.
    pub fn int_of(ty: &SemType, bits: u64) -> Expr {
        match ty {
            SemType::UInt(w) => Expr::uint(bits, *w),
            SemType::SInt(w) => Expr::Int {
                bits: bits & super::types::mask(*w),
                signed: true,
                width: *w,
            },
            SemType::Bool => Expr::Bool(bits & 1 == 1),
            SemType::Record(_) => panic!("no record literals"),
        }
    }

    pub fn select(self, field: &str) -> Expr {
        Expr::Select(Box::new(self), field.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::And, a, b)
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Or, a, b)
    }

    pub fn implies(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Implies, a, b)
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Eq, a, b)
    }

    pub fn neq(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Neq, a, b)
    }

    pub fn ltu(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Lt(Sign::Unsigned), a, b)
    }

    pub fn lts(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Lt(Sign::Signed), a, b)
    }

    pub fn geu(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Ge(Sign::Unsigned), a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Add, a, b)
    }

    pub fn ite(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::Ite(Box::new(c), Box::new(t), Box::new(e))
    }

    /// Conjunction of a list; `true` when empty.
    pub fn conj(parts: impl IntoIterator<Item = Expr>) -> Expr {
        let mut it = parts.into_iter();
        match it.next() {
            None => Expr::tt(),
            Some(first) => it.fold(first, Expr::and),
        }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Expr::Bool(_) | Expr::Int { .. } | Expr::Var(_) | Expr::Old(_) => 1,
            Expr::Select(e, _) | Expr::Not(e) => 1 + e.size(),
            Expr::Bin(_, a, b) => 1 + a.size() + b.size(),
            Expr::Ite(c, t, e) => 1 + c.size() + t.size() + e.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Bool(_) | Expr::Int { .. } | Expr::Var(_) | Expr::Old(_) => 1,
            Expr::Select(e, _) | Expr::Not(e) => 1 + e.depth(),
            Expr::Bin(_, a, b) => 1 + a.depth().max(b.depth()),
            Expr::Ite(c, t, e) => 1 + c.depth().max(t.depth()).max(e.depth()),
        }
    }

    pub fn contains_old(&self) -> bool {
        let (pre, _) = self.free_vars();
        !pre.is_empty()
    }

    /// `(names under old(..), names referenced as current state)`.
    pub fn free_vars(&self) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut pre = BTreeSet::new();
        let mut post = BTreeSet::new();
        self.collect_vars(&mut pre, &mut post);
        (pre, post)
    }

    fn collect_vars(&self, pre: &mut BTreeSet<String>, post: &mut BTreeSet<String>) {
        match self {
            Expr::Bool(_) | Expr::Int { .. } => {}
            Expr::Var(n) => {
                post.insert(n.clone());
            }
            Expr::Old(n) => {
                pre.insert(n.clone());
            }
            Expr::Select(e, _) | Expr::Not(e) => e.collect_vars(pre, post),
            Expr::Bin(_, a, b) => {
                a.collect_vars(pre, post);
                b.collect_vars(pre, post);
            }
            Expr::Ite(c, t, e) => {
                c.collect_vars(pre, post);
                t.collect_vars(pre, post);
                e.collect_vars(pre, post);
            }
        }
    }

    /// Rewrites variable references bottom-up.
    pub fn map_vars(&self, f: &impl Fn(&Expr) -> Option<Expr>) -> Expr {
        if let Some(e) = f(self) {
            return e;
        }
        match self {
            Expr::Bool(_) | Expr::Int { .. } | Expr::Var(_) | Expr::Old(_) => self.clone(),
            Expr::Select(e, field) => Expr::Select(Box::new(e.map_vars(f)), field.clone()),
            Expr::Not(e) => Expr::Not(Box::new(e.map_vars(f))),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
            Expr::Ite(c, t, e) => Expr::Ite(
                Box::new(c.map_vars(f)),
                Box::new(t.map_vars(f)),
                Box::new(e.map_vars(f)),
            ),
        }
    }

    /// Turns current-state references into pre-state references.
    pub fn to_old(&self) -> Expr {
        self.map_vars(&|e| match e {
            Expr::Var(n) => Some(Expr::Old(n.clone())),
            _ => None,
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::print::pretty_print(self))
    }
}

/// A pre/post contract. The precondition never mentions `old(..)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Contract {
    pub pre: Expr,
    pub post: Expr,
}

impl Contract {
    pub fn new(pre: Expr, post: Expr) -> Contract {
        Contract { pre, post }
    }

    pub fn trivial() -> Contract {
        Contract {
            pre: Expr::tt(),
            post: Expr::tt(),
        }
    }

    pub fn size(&self) -> usize {
        self.pre.size() + self.post.size()
    }

    /// Checks both predicates are Boolean in their positions.
    pub fn typecheck(&self, ctx: &super::VarContext) -> Result<(), super::IlError> {
        super::expect_bool(&self.pre, ctx, Position::Pre)?;
        super::expect_bool(&self.post, ctx, Position::Post)?;
        Ok(())
    }
}

impl fmt::Display for Contract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "requires {}\nensures {}", self.pre, self.post)
    }
}
