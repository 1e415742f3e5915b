use thiserror::Error;

use crate::dist::DistError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("no eps' in [0, eps] reaches tau = {tau}: phi(0) = {phi0}")]
    NoSolution { tau: f64, phi0: f64 },
    #[error("clamp bounds out of order: a = {a} > b = {b}")]
    InvalidBounds { a: f64, b: f64 },
    #[error("Laplace scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("{what}: {needed} configurations exceed the budget of {budget}")]
    EnumerationBudget { what: &'static str, needed: f64, budget: f64 },
    #[error("no sample size up to the budget reached the target (searched up to {band_low}, upper end {band_high:?})")]
    BudgetExceeded { band_low: u64, band_high: Option<u64> },
    #[error("the trimmed pair has tau = 1, so P' and Q' are undefined")]
    UndefinedPrime,
    #[error("hypothesis violated: max standard deviation {sigma} exceeds c * |gap| = {limit}")]
    HypothesisViolated { sigma: f64, limit: f64 },
    #[error("P and Q coincide; the sample complexity is infinite")]
    DegeneratePair,
    #[error("potential is not Lipschitz: |f(x) - f(x')| = {diff} > {limit} between neighbours {x:?} and {y:?}")]
    NotLipschitz { diff: f64, limit: f64, x: Vec<usize>, y: Vec<usize> },
    #[error("potential value {value} outside [0, 2]")]
    RangeViolation { value: f64 },
    #[error("empty sequence")]
    EmptySequence,
    #[error("stream ended after {observed} values without a trigger")]
    StreamExhausted { observed: u64 },
    #[error("{blocks} block(s) of size {block_size}; at least 2 are needed")]
    TooFewBlocks { blocks: usize, block_size: usize },
    #[error("tester succeeded on {rate} of calibration draws from {side}, below 2/3")]
    TesterContractViolation { side: &'static str, rate: f64 },
    #[error("coupling residual sampler gave up after {0} proposals")]
    CouplingRejection(u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
