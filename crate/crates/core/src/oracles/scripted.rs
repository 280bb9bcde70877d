//! Oracles replaying fixed replies, for hermetic tests.

use std::collections::VecDeque;
use std::sync::Mutex;

use super::{
    OracleError, ProcedureRef, SynthBudget, SynthQuery, Synthesizer, VerifResult, Verifier,
};
use crate::example::ExamplePair;
use crate::il::Contract;

/// Replies to `synthesize` calls in order, regardless of the query.
#[derive(Debug, Default)]
pub struct ScriptedSynthesizer {
    script: Mutex<VecDeque<Result<Contract, OracleError>>>,
}

impl ScriptedSynthesizer {
    pub fn new(contracts: impl IntoIterator<Item = Contract>) -> ScriptedSynthesizer {
        ScriptedSynthesizer::with_replies(contracts.into_iter().map(Ok))
    }

    pub fn with_replies(
        replies: impl IntoIterator<Item = Result<Contract, OracleError>>,
    ) -> ScriptedSynthesizer {
        ScriptedSynthesizer {
            script: Mutex::new(replies.into_iter().collect()),
        }
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().unwrap().len()
    }
}

impl Synthesizer for ScriptedSynthesizer {
    fn name(&self) -> &str {
        "scripted"
    }

    fn synthesize(
        &self,
        _f: &ProcedureRef,
        _q: &SynthQuery<'_>,
        _b: &SynthBudget,
    ) -> Result<Contract, OracleError> {
        self.script
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or(Err(OracleError::ScriptExhausted))
    }
}

/// Replies to `verify` and `verify_pair_impossible` from separate queues.
#[derive(Debug, Default)]
pub struct ScriptedVerifier {
    verify: Mutex<VecDeque<VerifResult>>,
    pairs: Mutex<VecDeque<VerifResult>>,
}

impl ScriptedVerifier {
    pub fn new(
        verify: impl IntoIterator<Item = VerifResult>,
        pairs: impl IntoIterator<Item = VerifResult>,
    ) -> ScriptedVerifier {
        ScriptedVerifier {
            verify: Mutex::new(verify.into_iter().collect()),
            pairs: Mutex::new(pairs.into_iter().collect()),
        }
    }

    pub fn remaining(&self) -> (usize, usize) {
        (
            self.verify.lock().unwrap().len(),
            self.pairs.lock().unwrap().len(),
        )
    }
}

impl Verifier for ScriptedVerifier {
    fn name(&self) -> &str {
        "scripted"
    }

    fn verify(&self, _c: &Contract, _f: &ProcedureRef) -> Result<VerifResult, OracleError> {
        self.verify
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(OracleError::ScriptExhausted)
    }

    fn verify_pair_impossible(
        &self,
        _f: &ProcedureRef,
        _pair: &ExamplePair,
    ) -> Result<VerifResult, OracleError> {
        self.pairs
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(OracleError::ScriptExhausted)
    }
}
