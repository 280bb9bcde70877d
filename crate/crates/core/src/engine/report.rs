//! Verdicts and their machine- and human-readable renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize, Serializer};

use super::ExampleSets;
use crate::example::ExamplePair;
use crate::il::Contract;
use crate::model::Trace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "result")]
pub enum Outcome {
    /// No violation within `bound` transitions; `exhaustive` when no path
    /// of the abstract model is longer.
    Pass {
        bound: usize,
        exhaustive: bool,
    },
    /// A violating trace whose every call is reachable.
    Fail {
        trace: Trace,
    },
    Inconclusive {
        reason: String,
    },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Pass { .. } => "pass",
            Outcome::Fail { .. } => "fail",
            Outcome::Inconclusive { .. } => "inconclusive",
        }
    }
}

/// Negative examples added after one CEGAR iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refinement {
    pub iteration: usize,
    pub procedure: String,
    pub negatives: Vec<ExamplePair>,
}

fn secs<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Stats {
    /// CEGIS iterations per procedure (IS).
    pub cegis: BTreeMap<String, usize>,
    /// CEGAR iterations (AR).
    pub cegar: usize,
    /// Candidates rejected for contradicting the examples.
    pub inconsistent: usize,
    #[serde(rename = "synth_secs", serialize_with = "secs")]
    pub synth_time: Duration,
    #[serde(rename = "verif_secs", serialize_with = "secs")]
    pub verif_time: Duration,
    #[serde(rename = "mc_secs", serialize_with = "secs")]
    pub mc_time: Duration,
    #[serde(rename = "total_secs", serialize_with = "secs")]
    pub total_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Contracts in IL text.
    #[serde(serialize_with = "contract_texts")]
    pub contracts: BTreeMap<String, Contract>,
    pub examples: BTreeMap<String, ExampleSets>,
    pub refinements: Vec<Refinement>,
    pub stats: Stats,
}

fn contract_texts<S: Serializer>(cs: &BTreeMap<String, Contract>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(cs.iter().map(|(k, c)| (k, c.to_string())))
}

impl Verdict {
    pub fn new(outcome: Outcome) -> Verdict {
        Verdict {
            outcome,
            contracts: BTreeMap::new(),
            examples: BTreeMap::new(),
            refinements: Vec::new(),
            stats: Stats::default(),
        }
    }

    /// Equality ignoring timing.
    pub fn same_result(&self, other: &Verdict) -> bool {
        self.outcome == other.outcome
            && self.contracts == other.contracts
            && self.examples == other.examples
            && self.refinements == other.refinements
            && self.stats.cegis == other.stats.cegis
            && self.stats.cegar == other.stats.cegar
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("verdicts serialize")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        match &self.outcome {
            Outcome::Pass { bound, exhaustive } => {
                let _ = write!(out, "PASS within {bound} transitions");
                if *exhaustive {
                    out.push_str(" (all paths explored)");
                }
                out.push('\n');
            }
            Outcome::Fail { trace } => {
                out.push_str("FAIL\n\ncounterexample:\n");
                out.push_str(&render_trace(trace));
            }
            Outcome::Inconclusive { reason } => {
                let _ = writeln!(out, "INCONCLUSIVE: {reason}");
            }
        }
        if !self.contracts.is_empty() {
            out.push_str("\ncontracts:\n");
            for (name, c) in &self.contracts {
                let _ = writeln!(out, "  {name}:");
                for line in c.to_string().lines() {
                    let _ = writeln!(out, "    {line}");
                }
            }
        }
        let s = &self.stats;
        out.push_str("\nstatistics:\n");
        for (name, n) in &s.cegis {
            let _ = writeln!(out, "  IS  {name:<20} {n}");
        }
        let _ = writeln!(out, "  AR  {}", s.cegar);
        let _ = writeln!(out, "  SOT {:.3}s", s.synth_time.as_secs_f64());
        let _ = writeln!(out, "  VOT {:.3}s", s.verif_time.as_secs_f64());
        let _ = writeln!(out, "  UT  {:.3}s", s.mc_time.as_secs_f64());
        out
    }
}

/// One line per step: time, mode, transition, state.
pub fn render_trace(t: &Trace) -> String {
    let mut out = String::new();
    for (i, s) in t.steps.iter().enumerate() {
        let via = s
            .transition
            .as_deref()
            .map(|x| format!(" via {x}"))
            .unwrap_or_default();
        let _ = writeln!(out, "  [{i}] t={} {}{via}: {}", s.time, s.mode, s.state);
        for c in &s.calls {
            let _ = writeln!(out, "        {}: {} -> {}", c.procedure, c.pre, c.post);
        }
    }
    if t.maximal {
        out.push_str("  (no transition enabled)\n");
    }
    out
}
