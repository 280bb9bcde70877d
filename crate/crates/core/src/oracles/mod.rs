//! Synthesis and verification oracles.
//!
//! A [`Verifier`] decides Hoare triples `{P} C {Q}` for one procedure and
//! returns a positive example when the triple fails. A [`Synthesizer`]
//! proposes a contract from positive and negative examples. Concrete
//! oracles: the exact mini-language verifier, CBMC and Kani adapters, an
//! enumerative PBE synthesizer, an LLM-backed synthesizer and scripted
//! doubles for tests.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::CodegenError;
use crate::example::ExamplePair;
use crate::il::flat::Layout;
use crate::il::{Assignment, Contract, Expr, IlError, VarContext};
use crate::minilang::MiniError;
use crate::model::{Language, Procedure};

mod enumerative;
mod external;
mod llm;
mod mini;
mod scripted;

pub use enumerative::EnumSynthesizer;
pub use external::{parse_cbmc_trace, parse_kani_playback, CbmcVerifier, KaniVerifier, ToolConfig};
pub use llm::{
    ChatMessage, HttpTransport, LlmSynthesizer, Transcript, TranscriptRecord, TranscriptTransport,
    Transport,
};
pub use mini::MiniVerifier;
pub use scripted::{ScriptedSynthesizer, ScriptedVerifier};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("no candidate contract: {0}")]
    NoCandidate(String),
    #[error("scripted oracle has no reply left for this call")]
    ScriptExhausted,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Codegen(#[from] CodegenError),
    #[error(transparent)]
    Il(#[from] IlError),
    #[error(transparent)]
    Mini(#[from] MiniError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum UnknownReason {
    Timeout,
    ToolError(String),
    Unsupported(String),
}

impl fmt::Display for UnknownReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnknownReason::Timeout => f.write_str("timeout"),
            UnknownReason::ToolError(m) => write!(f, "tool error: {m}"),
            UnknownReason::Unsupported(m) => write!(f, "unsupported: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifResult {
    Pass,
    /// A behavior of the procedure the contract does not admit.
    Fail(ExamplePair),
    Unknown(UnknownReason),
}

/// A procedure together with its own variable context.
#[derive(Debug, Clone)]
pub struct ProcedureRef {
    pub procedure: Procedure,
    pub ctx: VarContext,
}

impl ProcedureRef {
    /// `p` over the model variables `vars`, restricted to its interface.
    pub fn new(p: &Procedure, vars: &VarContext) -> ProcedureRef {
        ProcedureRef {
            procedure: p.clone(),
            ctx: p.context(vars),
        }
    }

    pub fn name(&self) -> &str {
        &self.procedure.name
    }

    pub fn language(&self) -> Language {
        self.procedure.language
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthBudget {
    /// Expressions generated (enumerative) before giving up.
    pub max_candidates: usize,
    pub max_depth: usize,
    pub wall_clock: Duration,
    /// Concurrent LLM query chains per call.
    pub parallel_queries: usize,
}

impl Default for SynthBudget {
    fn default() -> SynthBudget {
        SynthBudget {
            max_candidates: 100_000_000,
            max_depth: 6,
            wall_clock: Duration::from_secs(60),
            parallel_queries: 3,
        }
    }
}

/// The inputs of one synthesis call.
#[derive(Debug, Clone, Copy, Default)]
pub struct SynthQuery<'a> {
    pub positive: &'a [ExamplePair],
    pub negative: &'a [ExamplePair],
    /// Contracts the answer must differ from.
    pub excluded: &'a [Contract],
    /// The last rejected contract and the example refuting it.
    pub previous: Option<(&'a Contract, &'a ExamplePair)>,
}

pub trait Verifier: Send + Sync {
    fn name(&self) -> &str;

    fn verify(&self, c: &Contract, f: &ProcedureRef) -> Result<VerifResult, OracleError>;

    /// `Pass` when `f` cannot map `pair.pre` to `pair.post`. The default
    /// checks `{V = d} f {V' != d'}`.
    fn verify_pair_impossible(
        &self,
        f: &ProcedureRef,
        pair: &ExamplePair,
    ) -> Result<VerifResult, OracleError> {
        let c = Contract::new(
            state_equals(&f.ctx, &pair.pre, false)?,
            Expr::not(state_equals(&f.ctx, &pair.post, false)?),
        );
        self.verify(&c, f)
    }
}

pub trait Synthesizer: Send + Sync {
    fn name(&self) -> &str;

    fn synthesize(
        &self,
        f: &ProcedureRef,
        q: &SynthQuery<'_>,
        b: &SynthBudget,
    ) -> Result<Contract, OracleError>;
}

/// Conjunction of `leaf == value` over every scalar leaf of `ctx`.
pub fn state_equals(ctx: &VarContext, a: &Assignment, old: bool) -> Result<Expr, IlError> {
    let layout = Layout::new(ctx);
    let flat = layout.to_flat(a)?;
    let mut parts = Vec::new();
    for (slot, bits) in layout.slots().iter().zip(flat) {
        let mut e = if old {
            Expr::old(&slot.var)
        } else {
            Expr::var(&slot.var)
        };
        for f in &slot.path {
            e = e.select(f);
        }
        let lit = match slot.ty {
            crate::il::SemType::Bool => Expr::Bool(bits == 1),
            ref ty => Expr::int_of(ty, bits),
        };
        parts.push(Expr::eq(e, lit));
    }
    Ok(Expr::conj(parts))
}

/// Whether `c` admits every positive and rejects every negative example.
pub fn consistent(
    c: &Contract,
    positive: &[ExamplePair],
    negative: &[ExamplePair],
) -> Result<bool, IlError> {
    use crate::il::eval_bool;
    for x in positive {
        if eval_bool(&c.pre, &x.pre, None)? && !eval_bool(&c.post, &x.pre, Some(&x.post))? {
            return Ok(false);
        }
    }
    for x in negative {
        if !eval_bool(&c.pre, &x.pre, None)? || eval_bool(&c.post, &x.pre, Some(&x.post))? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Routes calls to a per-language verifier.
pub struct LanguageRouter {
    pub mini: Box<dyn Verifier>,
    pub c: Option<Box<dyn Verifier>>,
    pub rust: Option<Box<dyn Verifier>>,
}

impl LanguageRouter {
    pub fn mini_only(mini: MiniVerifier) -> LanguageRouter {
        LanguageRouter {
            mini: Box::new(mini),
            c: None,
            rust: None,
        }
    }

    fn pick(&self, lang: Language) -> Option<&dyn Verifier> {
        match lang {
            Language::Mini => Some(self.mini.as_ref()),
            Language::C => self.c.as_deref(),
            Language::Rust => self.rust.as_deref(),
        }
    }
}

impl Verifier for LanguageRouter {
    fn name(&self) -> &str {
        "router"
    }

    fn verify(&self, c: &Contract, f: &ProcedureRef) -> Result<VerifResult, OracleError> {
        match self.pick(f.language()) {
            Some(v) => v.verify(c, f),
            None => Ok(VerifResult::Unknown(UnknownReason::Unsupported(format!(
                "no verifier configured for {} procedures",
                f.language()
            )))),
        }
    }

    fn verify_pair_impossible(
        &self,
        f: &ProcedureRef,
        pair: &ExamplePair,
    ) -> Result<VerifResult, OracleError> {
        match self.pick(f.language()) {
            Some(v) => v.verify_pair_impossible(f, pair),
            None => Ok(VerifResult::Unknown(UnknownReason::Unsupported(format!(
                "no verifier configured for {} procedures",
                f.language()
            )))),
        }
    }
}
