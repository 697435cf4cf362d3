//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("map is degenerate: ad - bc vanishes to working precision")]
    DegenerateMap,
    #[error("map is parabolic or elliptic: multiplier within 2^-(P/2) of the unit circle")]
    ParabolicOrElliptic,
    #[error("marking is degenerate: {0}")]
    DegenerateMarking(String),
    #[error("no classical Schottky certificate: {0}")]
    NotClassicalSchottky(String),
    #[error("word letter out of range for group of rank {rank}: {letter}")]
    RankMismatch { rank: usize, letter: i32 },
    #[error("word freely reduces to the identity")]
    EmptyWord,
    #[error("a class multiplier lies on the unit circle to working precision")]
    MultiplierOnUnitCircle,
    #[error("shell contributions failed to decay over {shells} consecutive shells; product may diverge")]
    DivergenceSuspected { shells: usize },
    #[error("group is not real: {0}")]
    NotRealGroup(String),
    #[error("group is not in normalized marking position: {0}")]
    NotNormalized(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operation needs a validated circle certificate")]
    CertificateRequired,
    #[error("integration path cannot avoid the Schottky circles")]
    PathCrossesCircle,
    #[error("seed pole lies in the closure of the fundamental domain")]
    PoleInDomain,
    #[error("series specialization has a pole at z0 = {0}")]
    PoleAtZ0(String),
    #[error("exact division failed at order {order}: coefficient is not integral")]
    IntegralityViolation { order: usize },
    #[error("seed differentials are rank deficient: rank {rank} < {needed}; supply more pole configurations")]
    RankDeficientSeeds { rank: usize, needed: usize },
    #[error("fixed-point values coincide; cross-ratio data is degenerate")]
    CoincidentFixedPoints,
    #[error("trace^2 - 2 det has no invertible constant term for this word / specialization")]
    NonInvertibleLeadingTerm,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
