use thiserror::Error;

use crate::classifier::CaseLabel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("negative gain in state {state}")]
    NegativeGain { state: usize },
    #[error("non-finite gain in state {state}")]
    NonFiniteGain { state: usize },
    #[error("negative weight in state {state}")]
    NegativeWeight { state: usize },
    #[error("weight-sum violation: weights sum to {sum}")]
    WeightSum { sum: f64 },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("parse failure: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("misaligned lengths: ensemble has {expected} states, policy has {found}")]
    Misaligned { expected: usize, found: usize },
    #[error("invalid channel configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid multiplier: {0}")]
    InvalidMultiplier(String),
    #[error("no-convergence: {0}")]
    NoConvergence(String),
    #[error("not-in-case: {0}")]
    NotInCase(CaseLabel),
    #[error("no-convergence while solving {case}: {detail}")]
    CaseNoConvergence { case: CaseLabel, detail: String },
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
