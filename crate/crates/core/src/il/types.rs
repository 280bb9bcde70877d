use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::IlError;

/// Maximum bit width of an integer type.
pub const MAX_WIDTH: u32 = 64;

/// Semantic type of an IL term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SemType {
    Bool,
    UInt(u32),
    SInt(u32),
    /// Fields in declaration order.
    Record(Vec<(String, SemType)>),
}

impl SemType {
    pub fn record(fields: Vec<(String, SemType)>) -> Result<SemType, IlError> {
        let ty = SemType::Record(fields);
        ty.validate()?;
        Ok(ty)
    }

    /// Checks the width and field-name invariants recursively.
    pub fn validate(&self) -> Result<(), IlError> {
        match self {
            SemType::Bool => Ok(()),
            SemType::UInt(w) | SemType::SInt(w) => {
                if *w == 0 || *w > MAX_WIDTH {
                    Err(IlError::InvalidType(format!("width {w} outside 1..=64")))
                } else {
                    Ok(())
                }
            }
            SemType::Record(fields) => {
                if fields.is_empty() {
                    return Err(IlError::InvalidType("record without fields".into()));
                }
                let mut seen = std::collections::BTreeSet::new();
                for (name, ty) in fields {
                    if name.is_empty() || !is_identifier(name) {
                        return Err(IlError::InvalidType(format!("bad field name `{name}`")));
                    }
                    if !seen.insert(name.as_str()) {
                        return Err(IlError::InvalidType(format!("duplicate field `{name}`")));
                    }
                    ty.validate()?;
                }
                Ok(())
            }
        }
    }

    pub fn is_int(&self) -> bool {
        matches!(self, SemType::UInt(_) | SemType::SInt(_))
    }

    pub fn is_signed(&self) -> bool {
        matches!(self, SemType::SInt(_))
    }

    pub fn width(&self) -> Option<u32> {
        match self {
            SemType::UInt(w) | SemType::SInt(w) => Some(*w),
            _ => None,
        }
    }

    pub fn field(&self, name: &str) -> Option<&SemType> {
        match self {
            SemType::Record(fields) => fields.iter().find(|(n, _)| n == name).map(|(_, t)| t),
            _ => None,
        }
    }

    /// Number of distinct values of this type, saturating at `u128::MAX`.
    pub fn cardinality(&self) -> u128 {
        match self {
            SemType::Bool => 2,
            SemType::UInt(w) | SemType::SInt(w) => 1u128 << *w,
            SemType::Record(fields) => fields
                .iter()
                .fold(1u128, |acc, (_, t)| acc.saturating_mul(t.cardinality())),
        }
    }

    /// Scalar leaves of this type as (field path, scalar type), in declaration order.
    pub fn leaves(&self) -> Vec<(Vec<String>, SemType)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut Vec::new(), &mut out);
        out
    }

    fn collect_leaves(&self, prefix: &mut Vec<String>, out: &mut Vec<(Vec<String>, SemType)>) {
        match self {
            SemType::Record(fields) => {
                for (name, ty) in fields {
                    prefix.push(name.clone());
                    ty.collect_leaves(prefix, out);
                    prefix.pop();
                }
            }
            scalar => out.push((prefix.clone(), scalar.clone())),
        }
    }

    /// Parses the compact type notation used in model files: `bool`, `u8`, `i3`.
    pub fn parse_scalar(text: &str) -> Option<SemType> {
        let text = text.trim();
        if text == "bool" {
            return Some(SemType::Bool);
        }
        let signed = text.starts_with('i');
        let digits = text.strip_prefix('u').or_else(|| text.strip_prefix('i'))?;
        let w: u32 = digits.parse().ok()?;
        if w == 0 || w > MAX_WIDTH {
            return None;
        }
        Some(if signed {
            SemType::SInt(w)
        } else {
            SemType::UInt(w)
        })
    }
}

impl fmt::Display for SemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemType::Bool => write!(f, "bool"),
            SemType::UInt(w) => write!(f, "u{w}"),
            SemType::SInt(w) => write!(f, "i{w}"),
            SemType::Record(fields) => {
                write!(f, "{{")?;
                for (i, (n, t)) in fields.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{n}: {t}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Interprets the low `width` bits of `bits` as a two's-complement integer.
pub(crate) fn to_signed(bits: u64, width: u32) -> i64 {
    if width >= 64 {
        bits as i64
    } else {
        let shift = 64 - width;
        ((bits << shift) as i64) >> shift
    }
}

/// A typed IL value. Integers store their raw `width`-bit pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Value {
    Bool(bool),
    Int { bits: u64, signed: bool, width: u32 },
    Record(Vec<(String, Value)>),
}

impl Value {
    pub fn uint(bits: u64, width: u32) -> Value {
        Value::Int {
            bits: bits & mask(width),
            signed: false,
            width,
        }
    }

    pub fn sint(v: i64, width: u32) -> Value {
        Value::Int {
            bits: (v as u64) & mask(width),
            signed: true,
            width,
        }
    }

    /// Builds an integer of type `ty` from raw bits (masked to width).
    pub fn from_bits(ty: &SemType, bits: u64) -> Value {
        match ty {
            SemType::Bool => Value::Bool(bits & 1 == 1),
            SemType::UInt(w) => Value::uint(bits, *w),
            SemType::SInt(w) => Value::Int {
                bits: bits & mask(*w),
                signed: true,
                width: *w,
            },
            SemType::Record(_) => panic!("from_bits on record type"),
        }
    }

    pub fn sem_type(&self) -> SemType {
        match self {
            Value::Bool(_) => SemType::Bool,
            Value::Int {
                signed: false,
                width,
                ..
            } => SemType::UInt(*width),
            Value::Int {
                signed: true,
                width,
                ..
            } => SemType::SInt(*width),
            Value::Record(fields) => SemType::Record(
                fields
                    .iter()
                    .map(|(n, v)| (n.clone(), v.sem_type()))
                    .collect(),
            ),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn bits(&self) -> Option<u64> {
        match self {
            Value::Bool(b) => Some(*b as u64),
            Value::Int { bits, .. } => Some(*bits),
            Value::Record(_) => None,
        }
    }

    pub fn field(&self, name: &str) -> Option<&Value> {
        match self {
            Value::Record(fields) => fields.iter().find(|(n, _)| n == name).map(|(_, v)| v),
            _ => None,
        }
    }

    /// The all-zero value of a type.
    pub fn zero(ty: &SemType) -> Value {
        match ty {
            SemType::Record(fields) => Value::Record(
                fields
                    .iter()
                    .map(|(n, t)| (n.clone(), Value::zero(t)))
                    .collect(),
            ),
            scalar => Value::from_bits(scalar, 0),
        }
    }

    /// Checks the payload fits the type.
    pub fn conforms(&self, ty: &SemType) -> bool {
        match (self, ty) {
            (Value::Bool(_), SemType::Bool) => true,
            (
                Value::Int {
                    bits,
                    signed,
                    width,
                },
                SemType::UInt(w),
            ) => !*signed && width == w && *bits & !mask(*w) == 0,
            (
                Value::Int {
                    bits,
                    signed,
                    width,
                },
                SemType::SInt(w),
            ) => *signed && width == w && *bits & !mask(*w) == 0,
            (Value::Record(vals), SemType::Record(fields)) => {
                vals.len() == fields.len()
                    && vals
                        .iter()
                        .zip(fields)
                        .all(|((vn, v), (fname, ft))| vn == fname && v.conforms(ft))
            }
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int {
                bits,
                signed: false,
                ..
            } => write!(f, "{bits}"),
            Value::Int {
                bits,
                signed: true,
                width,
            } => write!(f, "{}", to_signed(*bits, *width)),
            Value::Record(fields) => {
                write!(f, "{{")?;
                for (i, (n, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{n}: {v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// The shared, typed variable set. Variables keep declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VarContext {
    vars: Vec<(String, SemType)>,
}

impl VarContext {
    pub fn new(vars: Vec<(String, SemType)>) -> Result<VarContext, IlError> {
        let mut seen = std::collections::BTreeSet::new();
        for (name, ty) in &vars {
            if !is_identifier(name) {
                return Err(IlError::InvalidType(format!("bad variable name `{name}`")));
            }
            if !seen.insert(name.as_str()) {
                return Err(IlError::InvalidType(format!("duplicate variable `{name}`")));
            }
            ty.validate()?;
        }
        Ok(VarContext { vars })
    }

    pub fn get(&self, name: &str) -> Option<&SemType> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SemType)> {
        self.vars.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Sub-context restricted to `names`, keeping this context's order.
    pub fn restrict<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> VarContext {
        let keep: std::collections::BTreeSet<&str> = names.into_iter().collect();
        VarContext {
            vars: self
                .vars
                .iter()
                .filter(|(n, _)| keep.contains(n.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Adds one variable; fails on duplicates.
    pub fn with(&self, name: &str, ty: SemType) -> Result<VarContext, IlError> {
        let mut vars = self.vars.clone();
        vars.push((name.to_string(), ty));
        VarContext::new(vars)
    }

    /// Total number of distinct assignments, saturating.
    pub fn domain_size(&self) -> u128 {
        self.vars
            .iter()
            .fold(1u128, |acc, (_, t)| acc.saturating_mul(t.cardinality()))
    }
}

/// A total map from a context's variables to conforming values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Assignment {
    values: BTreeMap<String, Value>,
}

impl Assignment {
    /// Builds an assignment, checking it covers `ctx` exactly with conforming values.
    pub fn new(ctx: &VarContext, values: BTreeMap<String, Value>) -> Result<Assignment, IlError> {
        let a = Assignment { values };
        a.check(ctx)?;
        Ok(a)
    }

    /// Unchecked constructor; callers guarantee conformance.
    pub fn from_map(values: BTreeMap<String, Value>) -> Assignment {
        Assignment { values }
    }

    pub fn from_pairs<I, S>(pairs: I) -> Assignment
    where
        I: IntoIterator<Item = (S, Value)>,
        S: Into<String>,
    {
        Assignment {
            values: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn check(&self, ctx: &VarContext) -> Result<(), IlError> {
        if self.values.len() != ctx.len() {
            return Err(IlError::NonConforming(format!(
                "assignment has {} variables, context has {}",
                self.values.len(),
                ctx.len()
            )));
        }
        for (name, ty) in ctx.iter() {
            match self.values.get(name) {
                None => return Err(IlError::NonConforming(format!("missing variable `{name}`"))),
                Some(v) if !v.conforms(ty) => {
                    return Err(IlError::NonConforming(format!(
                        "value {v} of `{name}` does not conform to {ty}"
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn set(&mut self, name: &str, v: Value) {
        self.values.insert(name.to_string(), v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn values(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    /// Keeps only the variables of `ctx`.
    pub fn project(&self, ctx: &VarContext) -> Assignment {
        Assignment {
            values: ctx
                .names()
                .filter_map(|n| self.values.get(n).map(|v| (n.to_string(), v.clone())))
                .collect(),
        }
    }

    /// All-zero assignment of a context.
    pub fn zero(ctx: &VarContext) -> Assignment {
        Assignment {
            values: ctx
                .iter()
                .map(|(n, t)| (n.to_string(), Value::zero(t)))
                .collect(),
        }
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (n, v)) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{n}={v}")?;
        }
        write!(f, ")")
    }
}
