//! Concrete execution of mini-language models and trace evaluation.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    validate_model, Call, Diagnostic, Language, PolyglotModel, Property, PropertyKind, Step, Trace,
};
use crate::il::flat::{compile, Layout};
use crate::il::{eval_bool, Assignment, IlError, Position};
use crate::minilang::{exec_mini, MiniError, MiniProc};

/// Initial-state candidates are searched among this many states at most.
const INIT_SEARCH: u64 = 1 << 20;
const INIT_KEEP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("model is not well-formed: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("procedure `{0}` is not executable (only mini procedures can be simulated)")]
    NotExecutable(String),
    #[error("no initial state satisfies the init predicate")]
    NoInitialState,
    #[error(transparent)]
    Mini(#[from] MiniError),
    #[error(transparent)]
    Il(#[from] IlError),
}

/// What a scheduler is asked to resolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice<'a> {
    InitialState,
    Transition,
    /// Post-state of a nondeterministic procedure call.
    Outcome(&'a str),
}

/// Resolves nondeterminism during simulation. Only called with at least
/// two options; must return an index below `options`.
pub trait Scheduler {
    fn choose(&mut self, choice: Choice<'_>, options: usize) -> usize;
}

/// Uniform choices from a seeded ChaCha stream.
#[derive(Debug, Clone)]
pub struct SeededScheduler {
    rng: ChaCha8Rng,
}

impl SeededScheduler {
    pub fn new(seed: u64) -> SeededScheduler {
        SeededScheduler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Scheduler for SeededScheduler {
    fn choose(&mut self, _choice: Choice<'_>, options: usize) -> usize {
        self.rng.gen_range(0..options)
    }
}

/// Replays a fixed list of choices; picks option 0 once exhausted.
#[derive(Debug, Clone, Default)]
pub struct ScriptedScheduler {
    script: VecDeque<usize>,
}

impl ScriptedScheduler {
    pub fn new(script: impl IntoIterator<Item = usize>) -> ScriptedScheduler {
        ScriptedScheduler {
            script: script.into_iter().collect(),
        }
    }
}

impl Scheduler for ScriptedScheduler {
    fn choose(&mut self, _choice: Choice<'_>, options: usize) -> usize {
        self.script.pop_front().unwrap_or(0).min(options - 1)
    }
}

fn pick<T: Clone>(sched: &mut dyn Scheduler, choice: Choice<'_>, options: &[T]) -> T {
    let i = if options.len() > 1 {
        sched.choose(choice, options.len())
    } else {
        0
    };
    options[i].clone()
}

struct Executor<'m> {
    model: &'m PolyglotModel,
    procs: BTreeMap<String, MiniProc>,
}

impl<'m> Executor<'m> {
    fn new(model: &'m PolyglotModel) -> Result<Executor<'m>, SimError> {
        let mut procs = BTreeMap::new();
        for name in model.used_procedures() {
            let p = &model.procedures[&name];
            if p.language != Language::Mini {
                return Err(SimError::NotExecutable(name));
            }
            procs.insert(name, p.mini_proc(&model.vars).expect("mini")?);
        }
        Ok(Executor { model, procs })
    }

    /// All full-model post-states of one call.
    fn call(&self, name: &str, state: &Assignment) -> Result<Vec<Assignment>, SimError> {
        let p = &self.procs[name];
        let local = state.project(&p.ctx);
        let posts = exec_mini(p, &local)?;
        Ok(posts
            .iter()
            .map(|post| {
                let mut full = state.clone();
                for (k, v) in post.iter() {
                    full.set(k, v.clone());
                }
                full
            })
            .collect())
    }

    fn run_calls(
        &self,
        names: &[String],
        mut state: Assignment,
        sched: &mut dyn Scheduler,
    ) -> Result<(Vec<Call>, Assignment), SimError> {
        let mut calls = Vec::new();
        for name in names {
            let posts = self.call(name, &state)?;
            let post = pick(sched, Choice::Outcome(name), &posts);
            calls.push(Call {
                procedure: name.clone(),
                pre: state,
                post: post.clone(),
            });
            state = post;
        }
        Ok((calls, state))
    }

    fn initial_candidates(&self) -> Result<Vec<Assignment>, SimError> {
        let layout = Layout::new(&self.model.vars);
        let init = compile(&self.model.init.predicate, &layout, Position::Pre)?;
        let mut found = Vec::new();
        let mut seen = 0u64;
        layout.for_each_state(|s| {
            if init.holds(s, s) {
                found.push(layout.from_flat(s));
            }
            seen += 1;
            found.len() < INIT_KEEP && seen < INIT_SEARCH
        });
        if found.is_empty() {
            return Err(SimError::NoInitialState);
        }
        Ok(found)
    }

    fn enabled(&self, mode: &str, state: &Assignment) -> Result<Vec<usize>, SimError> {
        let mut out = Vec::new();
        for (i, t) in self.model.transitions.iter().enumerate() {
            if t.from == mode && eval_bool(&t.guard, state, None)? {
                out.push(i);
            }
        }
        Ok(out)
    }
}

/// Runs up to `steps` transitions from a scheduler-chosen initial state.
/// Stops early (with `maximal` set) when no transition is enabled.
pub fn simulate(
    m: &PolyglotModel,
    steps: usize,
    sched: &mut dyn Scheduler,
) -> Result<Trace, SimError> {
    let diags = validate_model(m);
    if !diags.is_empty() {
        return Err(SimError::Invalid(diags));
    }
    let ex = Executor::new(m)?;
    let start = pick(sched, Choice::InitialState, &ex.initial_candidates()?);
    let (calls, state) = ex.run_calls(&m.init.procedures, start, sched)?;
    let mut trace = Trace {
        steps: vec![Step {
            mode: m.init.mode.clone(),
            state,
            transition: None,
            calls,
            time: 0,
        }],
        maximal: false,
    };
    loop {
        let last = trace.steps.last().expect("nonempty");
        let enabled = ex.enabled(&last.mode, &last.state)?;
        if enabled.is_empty() {
            trace.maximal = true;
            break;
        }
        if trace.steps.len() > steps {
            break;
        }
        let t = &m.transitions[pick(sched, Choice::Transition, &enabled)];
        let (calls, state) = ex.run_calls(&t.update, last.state.clone(), sched)?;
        let time = last.time + t.duration;
        trace.steps.push(Step {
            mode: t.to.clone(),
            state,
            transition: Some(t.id.clone()),
            calls,
            time,
        });
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    True,
    False,
    Inconclusive,
}

/// Evaluates a property on a finite trace.
pub fn holds(m: &PolyglotModel, p: &Property, t: &Trace) -> Result<Truth, IlError> {
    let sat = |s: &Step| eval_bool(&p.predicate, &m.observe(&s.mode, &s.state), None);
    match p.kind {
        PropertyKind::Invariant => {
            for s in &t.steps {
                if !sat(s)? {
                    return Ok(Truth::False);
                }
            }
            Ok(Truth::True)
        }
        PropertyKind::EventuallyWithin { time } => {
            for s in t.steps.iter().take_while(|s| s.time <= time) {
                if sat(s)? {
                    return Ok(Truth::True);
                }
            }
            match t.steps.last() {
                Some(last) if last.time > time || t.maximal => Ok(Truth::False),
                _ => Ok(Truth::Inconclusive),
            }
        }
    }
}
