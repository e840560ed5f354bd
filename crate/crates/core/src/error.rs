use thiserror::Error;

/// Failure modes shared by every module of the crate.
///
/// The `Display` form of each variant starts with a stable kebab-case tag
/// so callers (and the CLI) can match on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bad-dims: {0}")]
    BadDims(String),
    #[error("not-hermitian: max |m - m^dagger| = {0:e}")]
    NotHermitian(f64),
    #[error("not-unitary: max |u^dagger u - I| = {0:e}")]
    NotUnitary(f64),
    #[error("not-normalized: trace = {0}")]
    NotNormalized(f64),
    #[error("not-physical: {0}")]
    NotPhysical(String),
    #[error("bad-label: {0}")]
    BadLabel(String),
    #[error("bad-target: qubit {target} of {nqubits}")]
    BadTarget { target: usize, nqubits: usize },
    #[error("bad-sequence: {ops} interventions for {steps} interactions")]
    BadSequence { ops: usize, steps: usize },
    #[error("insufficient-basis: input operators span {rank} of {needed} dimensions")]
    InsufficientBasis { rank: usize, needed: usize },
    #[error("inconsistent-probs: axis {axis} pair sums to {sum}")]
    InconsistentProbs { axis: char, sum: f64 },
    #[error("incomplete-records: {0}")]
    IncompleteRecords(String),
    #[error("outside-span: basis expansion residual {0:e}")]
    OutsideSpan(f64),
    #[error("vanishing-branch: probability of the first intervention is {0:e}")]
    VanishingBranch(f64),
    #[error("support-mismatch: weight {0:e} outside the support of the reference")]
    SupportMismatch(f64),
    #[error("singular: {0}")]
    Singular(String),
    #[error("parse: line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
