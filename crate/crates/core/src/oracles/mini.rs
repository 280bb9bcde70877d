//! Exact verifier for mini-language procedures by domain enumeration.

use super::{OracleError, ProcedureRef, UnknownReason, VerifResult, Verifier};
use crate::example::ExamplePair;
use crate::il::Contract;
use crate::minilang::{brute_verify, pair_reproducible, BruteResult, MiniError, MiniProc};
use crate::model::Language;

#[derive(Debug, Clone)]
pub struct MiniVerifier {
    /// Widest variable leaf accepted by the enumeration.
    pub width_cap: u32,
}

impl Default for MiniVerifier {
    fn default() -> MiniVerifier {
        MiniVerifier { width_cap: 16 }
    }
}

impl MiniVerifier {
    fn program(f: &ProcedureRef) -> Result<MiniProc, OracleError> {
        if f.language() != Language::Mini {
            return Err(OracleError::Unsupported(format!(
                "`{}` is not a mini procedure",
                f.name()
            )));
        }
        Ok(crate::minilang::parse_mini(&f.procedure.source, &f.ctx)?)
    }
}

impl Verifier for MiniVerifier {
    fn name(&self) -> &str {
        "mini"
    }

    fn verify(&self, c: &Contract, f: &ProcedureRef) -> Result<VerifResult, OracleError> {
        let p = Self::program(f)?;
        match brute_verify(c, &p, self.width_cap) {
            Ok(BruteResult::Pass) => Ok(VerifResult::Pass),
            Ok(BruteResult::Fail(x)) => Ok(VerifResult::Fail(x)),
            Err(MiniError::DomainTooLarge { reason }) => {
                Ok(VerifResult::Unknown(UnknownReason::Unsupported(reason)))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn verify_pair_impossible(
        &self,
        f: &ProcedureRef,
        pair: &ExamplePair,
    ) -> Result<VerifResult, OracleError> {
        let p = Self::program(f)?;
        if pair_reproducible(&p, &pair.pre, &pair.post)? {
            Ok(VerifResult::Fail(ExamplePair::positive(
                pair.pre.clone(),
                pair.post.clone(),
            )))
        } else {
            Ok(VerifResult::Pass)
        }
    }
}
