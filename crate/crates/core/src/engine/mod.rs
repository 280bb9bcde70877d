//! The CEGIS/CEGAR driver.
//!
//! [`Engine::synth_contract`] alternates a synthesizer and a verifier until
//! a contract is valid for one procedure. [`Engine::check_spurious`] asks
//! the verifier whether the calls of an abstract counterexample are
//! reachable. [`Engine::verify`] ties both to the bounded model checker:
//! contracts are synthesized, the induced model is checked, and spurious
//! traces become negative examples for the next round.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{bmc, extract, induce, CheckerError, McResult, SolverConfig};
use crate::example::{ExamplePair, Polarity};
use crate::il::{Contract, IlError};
use crate::model::{validate_model, PolyglotModel, Property, Trace};
use crate::oracles::{
    consistent, OracleError, ProcedureRef, SynthBudget, SynthQuery, Synthesizer, UnknownReason,
    VerifResult, Verifier,
};

mod report;

pub use report::{render_trace, Outcome, Refinement, Stats, Verdict};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unknown procedure `{0}`")]
    UnknownProcedure(String),
    #[error("CEGIS budget of {iterations} iterations exhausted for `{procedure}`")]
    CegisBudget {
        procedure: String,
        iterations: usize,
    },
    #[error("verifier returned the known example {example} again for `{procedure}`")]
    OracleStagnation {
        procedure: String,
        example: ExamplePair,
    },
    #[error("verifier returned unknown for `{procedure}`: {reason}")]
    Unknown {
        procedure: String,
        reason: UnknownReason,
    },
    #[error("synthesis failed for `{procedure}`: {source}")]
    Synthesis {
        procedure: String,
        source: OracleError,
    },
    #[error("verification failed for `{procedure}`: {source}")]
    Verification {
        procedure: String,
        source: OracleError,
    },
    #[error(transparent)]
    Checker(#[from] CheckerError),
    #[error(transparent)]
    Il(#[from] IlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthOracleKind {
    #[default]
    Enum,
    Llm,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifOracleKind {
    Mini,
    Cbmc,
    Kani,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifierSelection {
    pub mini: VerifOracleKind,
    pub c: VerifOracleKind,
    pub rust: VerifOracleKind,
}

impl Default for VerifierSelection {
    fn default() -> VerifierSelection {
        VerifierSelection {
            mini: VerifOracleKind::Mini,
            c: VerifOracleKind::Cbmc,
            rust: VerifOracleKind::Kani,
        }
    }
}

/// What to do when a verifier answers neither pass nor fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownPolicy {
    /// Stop with an inconclusive verdict.
    #[default]
    Abort,
    /// During synthesis, reject the candidate without an example.
    TreatAsFail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub synth_oracle: SynthOracleKind,
    pub verifiers: VerifierSelection,
    /// Transitions explored by the model checker.
    pub bound: usize,
    /// Synthesize/verify rounds per procedure per CEGAR iteration.
    pub max_cegis: usize,
    pub max_cegar: usize,
    pub unknown_policy: UnknownPolicy,
    pub synth_budget: SynthBudget,
    pub solver: SolverConfig,
    /// Synthesize the procedures of one sweep on separate threads.
    pub concurrent_synthesis: bool,
}

impl Default for EngineConfig {
    fn default() -> EngineConfig {
        EngineConfig {
            synth_oracle: SynthOracleKind::Enum,
            verifiers: VerifierSelection::default(),
            bound: 12,
            max_cegis: 50,
            max_cegar: 50,
            unknown_policy: UnknownPolicy::Abort,
            synth_budget: SynthBudget::default(),
            solver: SolverConfig::default(),
            concurrent_synthesis: false,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        for (name, v) in [
            ("bound", self.bound),
            ("max_cegis", self.max_cegis),
            ("max_cegar", self.max_cegar),
        ] {
            if v == 0 {
                return Err(EngineError::Config(format!("{name} must be positive")));
            }
        }
        if self.synth_budget.max_candidates == 0 || self.synth_budget.wall_clock.is_zero() {
            return Err(EngineError::Config(
                "synthesis budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Positive and negative examples collected for one procedure.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleSets {
    pub positive: Vec<ExamplePair>,
    pub negative: Vec<ExamplePair>,
}

/// Counters of one [`Engine::synth_contract`] call.
#[derive(Debug, Clone, Default)]
pub struct SynthRun {
    pub iterations: usize,
    pub inconsistent: usize,
    pub synth_time: Duration,
    pub verif_time: Duration,
}

pub struct Engine<'a> {
    pub cfg: EngineConfig,
    synth: &'a dyn Synthesizer,
    verif: &'a dyn Verifier,
}

impl<'a> Engine<'a> {
    pub fn new(
        cfg: EngineConfig,
        synth: &'a dyn Synthesizer,
        verif: &'a dyn Verifier,
    ) -> Engine<'a> {
        Engine { cfg, synth, verif }
    }

    /// Synthesizes a contract for `f` valid against the verifier. New
    /// positive examples are appended to `x.positive`.
    pub fn synth_contract(
        &self,
        f: &ProcedureRef,
        x: &mut ExampleSets,
        run: &mut SynthRun,
    ) -> Result<Contract, EngineError> {
        let name = f.name().to_string();
        let mut excluded: Vec<Contract> = Vec::new();
        let mut previous: Option<(Contract, ExamplePair)> = None;
        for _ in 0..self.cfg.max_cegis {
            run.iterations += 1;
            let q = SynthQuery {
                positive: &x.positive,
                negative: &x.negative,
                excluded: &excluded,
                previous: previous.as_ref().map(|(c, e)| (c, e)),
            };
            let t = Instant::now();
            let c = self.synth.synthesize(f, &q, &self.cfg.synth_budget);
            run.synth_time += t.elapsed();
            let c = c.map_err(|source| EngineError::Synthesis {
                procedure: name.clone(),
                source,
            })?;
            if c.typecheck(&f.ctx).is_err() || !consistent(&c, &x.positive, &x.negative)? {
                log::debug!("{name}: candidate inconsistent with the examples:\n{c}");
                run.inconsistent += 1;
                excluded.push(c);
                continue;
            }
            let t = Instant::now();
            let r = self.verif.verify(&c, f);
            run.verif_time += t.elapsed();
            match r.map_err(|source| EngineError::Verification {
                procedure: name.clone(),
                source,
            })? {
                VerifResult::Pass => return Ok(c),
                VerifResult::Fail(e) => {
                    let e = ExamplePair::positive(e.pre, e.post).project(&f.ctx);
                    if x.positive.iter().any(|p| p.same_states(&e)) {
                        return Err(EngineError::OracleStagnation {
                            procedure: name,
                            example: e,
                        });
                    }
                    log::debug!("{name}: counterexample {e}");
                    x.positive.push(e.clone());
                    previous = Some((c, e));
                }
                VerifResult::Unknown(reason) => match self.cfg.unknown_policy {
                    UnknownPolicy::Abort => {
                        return Err(EngineError::Unknown {
                            procedure: name,
                            reason,
                        })
                    }
                    UnknownPolicy::TreatAsFail => excluded.push(c),
                },
            }
        }
        Err(EngineError::CegisBudget {
            procedure: name,
            iterations: self.cfg.max_cegis,
        })
    }

    /// Pairs of `f` in `t` that no execution of `f` produces, as negative
    /// examples.
    pub fn check_spurious(
        &self,
        m: &PolyglotModel,
        t: &Trace,
        f: &ProcedureRef,
        run: &mut SynthRun,
    ) -> Result<Vec<ExamplePair>, EngineError> {
        let pairs = extract(m, t).remove(f.name()).unwrap_or_default();
        let mut out = Vec::new();
        for pair in pairs {
            let time = Instant::now();
            let r = self.verif.verify_pair_impossible(f, &pair);
            run.verif_time += time.elapsed();
            match r.map_err(|source| EngineError::Verification {
                procedure: f.name().to_string(),
                source,
            })? {
                VerifResult::Pass => out.push(pair.with_polarity(Polarity::Negative)),
                VerifResult::Fail(_) => {}
                // An undecided pair can neither refine nor confirm the trace.
                VerifResult::Unknown(reason) => {
                    return Err(EngineError::Unknown {
                        procedure: f.name().to_string(),
                        reason,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Checks `p` on `m` up to `cfg.bound` transitions.
    pub fn verify(&self, m: &PolyglotModel, p: &Property) -> Result<Verdict, EngineError> {
        self.cfg.validate()?;
        let diags = validate_model(m);
        if !diags.is_empty() {
            let text: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
            return Err(EngineError::InvalidModel(text.join("; ")));
        }
        p.check(m)?;
        let started = Instant::now();
        let mut v = Verdict::new(Outcome::Inconclusive {
            reason: String::new(),
        });
        let outcome = match self.cegar(m, p, &mut v) {
            Ok(o) => o,
            Err(e) => Outcome::Inconclusive {
                reason: e.to_string(),
            },
        };
        v.outcome = outcome;
        v.stats.total_time = started.elapsed();
        Ok(v)
    }

    fn cegar(
        &self,
        m: &PolyglotModel,
        p: &Property,
        v: &mut Verdict,
    ) -> Result<Outcome, EngineError> {
        let procs: Vec<ProcedureRef> = m
            .used_procedures()
            .iter()
            .map(|n| ProcedureRef::new(&m.procedures[n], &m.vars))
            .collect();
        for f in &procs {
            v.examples
                .insert(f.name().to_string(), ExampleSets::default());
            v.stats.cegis.insert(f.name().to_string(), 0);
        }
        let mut dirty: BTreeSet<String> = procs.iter().map(|f| f.name().to_string()).collect();
        for round in 1..=self.cfg.max_cegar {
            v.stats.cegar = round;
            let todo: Vec<&ProcedureRef> =
                procs.iter().filter(|f| dirty.contains(f.name())).collect();
            for (name, r) in self.sweep(&todo, &v.examples) {
                let (c, x, run) = r;
                let stat = v.stats.cegis.get_mut(&name).expect("registered");
                *stat += run.iterations;
                v.stats.inconsistent += run.inconsistent;
                v.stats.synth_time += run.synth_time;
                v.stats.verif_time += run.verif_time;
                v.examples.insert(name.clone(), x);
                v.contracts.insert(name, c?);
            }
            dirty.clear();

            let t = Instant::now();
            let a = induce(m, &v.contracts, &self.cfg.solver);
            let res = a.and_then(|a| bmc(&a, p, self.cfg.bound, &self.cfg.solver));
            v.stats.mc_time += t.elapsed();
            let trace = match res? {
                McResult::Pass { bound, exhaustive } => {
                    return Ok(Outcome::Pass { bound, exhaustive })
                }
                McResult::Unknown(r) => {
                    return Ok(Outcome::Inconclusive {
                        reason: format!("model checker: {r}"),
                    })
                }
                McResult::Fail(t) => t,
            };

            let mut run = SynthRun::default();
            for f in &procs {
                let neg = self.check_spurious(m, &trace, f, &mut run)?;
                if neg.is_empty() {
                    continue;
                }
                let sets = v.examples.get_mut(f.name()).expect("registered");
                for e in &neg {
                    if sets.negative.iter().any(|n| n.same_states(e)) {
                        return Err(EngineError::OracleStagnation {
                            procedure: f.name().to_string(),
                            example: e.clone(),
                        });
                    }
                    sets.negative.push(e.clone());
                }
                v.refinements.push(Refinement {
                    iteration: round,
                    procedure: f.name().to_string(),
                    negatives: neg,
                });
                dirty.insert(f.name().to_string());
            }
            v.stats.verif_time += run.verif_time;
            if dirty.is_empty() {
                return Ok(Outcome::Fail { trace });
            }
        }
        Ok(Outcome::Inconclusive {
            reason: format!(
                "CEGAR budget of {} iterations exhausted",
                self.cfg.max_cegar
            ),
        })
    }

    /// Runs [`Engine::synth_contract`] for each procedure of one sweep.
    #[allow(clippy::type_complexity)]
    fn sweep(
        &self,
        todo: &[&ProcedureRef],
        examples: &BTreeMap<String, ExampleSets>,
    ) -> Vec<(
        String,
        (Result<Contract, EngineError>, ExampleSets, SynthRun),
    )> {
        let one = |f: &ProcedureRef| {
            let mut x = examples.get(f.name()).cloned().unwrap_or_default();
            let mut run = SynthRun::default();
            let c = self.synth_contract(f, &mut x, &mut run);
            (f.name().to_string(), (c, x, run))
        };
        if !self.cfg.concurrent_synthesis || todo.len() < 2 {
            return todo.iter().map(|f| one(f)).collect();
        }
        std::thread::scope(|s| {
            let handles: Vec<_> = todo.iter().map(|f| s.spawn(move || one(f))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("synthesis thread panicked"))
                .collect()
        })
    }
}
