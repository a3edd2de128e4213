use thiserror::Error;

use crate::oracle::Model;

/// Everything that can go wrong inside the library.
#[derive(Debug, Clone, PartialEq, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("weight at index {index} is negative or not finite: {weight}")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("weights sum to zero")]
    ZeroTotalMass,
    #[error("a distribution needs at least one point")]
    EmptyDomain,
    #[error("domain sizes differ: {left} vs {right}")]
    DomainMismatch { left: usize, right: usize },
    #[error("index {index} is outside a domain of size {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("malformed query set: {0}")]
    InvalidQuerySet(String),
    #[error("query set has zero probability mass")]
    ZeroMassSet,
    #[error("{model:?} oracle cannot answer a {shape} query")]
    IllegalShapeForModel { model: Model, shape: &'static str },
    #[error("query set contains no previously returned point")]
    DisciplineViolation,
    #[error("compared sets overlap")]
    SetsNotDisjoint,
    #[error("query counter overflow")]
    BudgetOverflow,
    #[error("sample of {0} points is too large to materialise")]
    SampleTooLarge(u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("target point is not in the no-gap regime")]
    NotInNoGapRegime,
    #[error("half-split needs an even domain size, got {0}")]
    OddN(usize),
    #[error("domain of size {0} exceeds 2^20")]
    DomainTooLarge(u128),
    #[error("bad block geometry: {0}")]
    BadBlockGeometry(String),
    #[error("approximate evaluation ran out of rounds")]
    Fail,
    #[error("{tester} needs a {expected:?} oracle, got {got:?}")]
    IncompatibleOracleModel {
        tester: &'static str,
        expected: Model,
        got: Model,
    },
    #[error("cannot parse distribution spec: {0}")]
    SpecParse(String),
    #[error("unknown tester id: {0}")]
    UnknownTester(String),
    #[error("constants profile: {0}")]
    Profile(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short stable tag used in CSV output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NegativeWeight { .. } => "negative-weight",
            Error::ZeroTotalMass => "zero-total-mass",
            Error::EmptyDomain => "empty-domain",
            Error::DomainMismatch { .. } => "domain-mismatch",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::InvalidQuerySet(_) => "invalid-query-set",
            Error::ZeroMassSet => "zero-mass-set",
            Error::IllegalShapeForModel { .. } => "illegal-shape",
            Error::DisciplineViolation => "discipline-violation",
            Error::SetsNotDisjoint => "sets-not-disjoint",
            Error::BudgetOverflow => "budget-overflow",
            Error::SampleTooLarge(_) => "sample-too-large",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::NotInNoGapRegime => "not-in-no-gap-regime",
            Error::OddN(_) => "odd-n",
            Error::DomainTooLarge(_) => "domain-too-large",
            Error::BadBlockGeometry(_) => "bad-block-geometry",
            Error::Fail => "fail",
            Error::IncompatibleOracleModel { .. } => "incompatible-oracle-model",
            Error::SpecParse(_) => "spec-parse",
            Error::UnknownTester(_) => "unknown-tester",
            Error::Profile(_) => "profile",
        }
    }
}

pub(crate) fn check_unit(name: &str, value: f64, max: f64) -> Result<()> {
    if value > 0.0 && value <= max {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} = {value} must lie in (0, {max}]"
        )))
    }
}
