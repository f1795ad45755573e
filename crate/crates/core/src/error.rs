use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("{what} sums to {sum}, expected 1")]
    SumMismatch { what: String, sum: f64 },

    #[error("covariate table has no strata")]
    EmptyTable,

    #[error("duplicate stratum label `{0}`")]
    DuplicateLabel(String),

    #[error("Pr(E=1|X=x) must be given for every stratum or for none")]
    PartialExposureModel,

    #[error("this scenario needs Pr(E=1|X=x) for every stratum")]
    MissingExposureModel,

    #[error("this scenario assumes randomized exposure; drop Pr(E=1|X=x)")]
    UnexpectedExposureModel,

    #[error("zero denominator in {0}")]
    ZeroDenominator(String),

    #[error("negative count in {0}")]
    NegativeCount(String),

    #[error("monotonicity is falsified by the margins: Pr(R=1|E=1) = {treated} < Pr(R=1|E=0) = {control}")]
    MonotonicityInfeasible { treated: f64, control: f64 },

    #[error("Pr(E=1, R=1) is zero; the probability of causation is undefined")]
    ZeroCaseProbability,

    #[error("Pr(R=1|E=1) is zero; the probability of causation is undefined")]
    ZeroTreatedRisk,

    #[error("Pr(E=1) is zero")]
    ZeroExposureProbability,

    #[error("unknown stratum `{0}`")]
    UnknownStratum(String),

    #[error("weight mismatch: {0}")]
    WeightMismatch(String),

    #[error("no potential-outcome distribution is consistent with the data: {0}")]
    Infeasible(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("document describes scenario `{found}` but `{expected}` was requested")]
    ScenarioMismatch { expected: String, found: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("verification failed: {0}")]
    Verification(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input.
    Validation,
    /// The data admit no distribution (empty polytope, falsified monotonicity).
    Infeasible,
    /// Closed form and oracle disagree, or a requested feature is missing.
    Internal,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Infeasible(_) | Error::MonotonicityInfeasible { .. } => ErrorKind::Infeasible,
            Error::Unsupported(_) | Error::Verification(_) => ErrorKind::Internal,
            _ => ErrorKind::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
