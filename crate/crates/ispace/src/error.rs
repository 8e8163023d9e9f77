//! Crate-wide error type.

use thiserror::Error;

use crate::ts::SufficiencyViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A state, symbol, or label id is out of range for the object it indexes.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    /// Two objects that must share an alphabet do not.
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    /// An operation that requires a deterministic system was given a
    /// nondeterministic one.
    #[error("nondeterministic input: state {state} has multiple successors under symbol {symbol}")]
    NondeterministicInput { state: usize, symbol: usize },

    /// A labeling or partition that must be sufficient is not.
    #[error("labeling is not sufficient: {0}")]
    NotSufficient(SufficiencyViolation),

    /// A filter or plan has no transition for the symbol it must consume.
    #[error("missing transition from state {state} under symbol {symbol} at stage {stage}")]
    MissingTransition {
        state: usize,
        symbol: usize,
        stage: usize,
    },

    /// A belief update produced the empty set: the observation is impossible
    /// for every member of the current belief.
    #[error("inconsistent observation {observation} at stage {stage}: belief became empty")]
    InconsistentObservation { observation: usize, stage: usize },

    /// Two trials assign different labels to the same history prefix.
    #[error("inconsistent trials: stage-{stage} prefix of trial {trial} is labeled both {first:?} and {second:?}")]
    InconsistentTrials {
        trial: usize,
        stage: usize,
        first: String,
        second: String,
    },

    /// A world or machine configuration violates its documented constraints.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Arguments are structurally valid but violate an operation's contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A constructed object would exceed the requested size cap.
    #[error("size limit exceeded: {what} would need {needed} elements, cap is {cap}")]
    SizeLimit {
        what: &'static str,
        needed: usize,
        cap: usize,
    },

    /// Exhaustive enumeration was requested on an instance past the hard cap.
    #[error("instance too large for exhaustive search: {states} states, cap is {cap}")]
    TooLarge { states: usize, cap: usize },
}
