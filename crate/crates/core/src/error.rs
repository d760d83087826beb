use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid interval: lower bound {lo} exceeds upper bound {hi}")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("interval endpoints must be finite, got [{lo}, {hi}]")]
    NonFiniteInterval { lo: f64, hi: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("kink active at evaluation point (branch margin below tolerance)")]
    KinkActive,
    #[error("constraint index {0} out of range")]
    ConstraintIndex(usize),
    #[error("point is not in the ground set")]
    NotInGroundSet,
    #[error("dimension {dim} exceeds the supported bound {max} for cone enumeration")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("multipliers must be nonnegative, got {0}")]
    NegativeMultiplier(f64),
    #[error("invalid precision vector: {0}")]
    InvalidPrecision(String),
    #[error("invalid uncertainty set: {0}")]
    InvalidUncertainty(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("objective {index} has lower value {lo} above upper value {hi} at a tested point")]
    ObjectiveOrderViolated { index: usize, lo: f64, hi: f64 },
    #[error("problem file: {0}")]
    ProblemFile(String),
    #[error("anchor pair failed the KKT-up-to-epsilon check: {0}")]
    AnchorNotKkt(String),
    #[error("candidate is not dual feasible: {0}")]
    NotDualFeasible(String),
    #[error("too many subgradient vertex selections: {count} exceeds cap {cap}")]
    SelectionBlowup { count: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
