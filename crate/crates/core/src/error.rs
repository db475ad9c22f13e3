use thiserror::Error;

use crate::channel::ConfigViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel configuration: {}", join_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("correlation matrix row {row} is zero")]
    ZeroRow { row: usize },

    #[error("input symbol x_{index} is zero")]
    ZeroSymbol { index: usize },

    #[error("index {index} outside [1:{bound}]")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("operation requires R >= 2 receive antennas")]
    SingleAntenna,

    #[error("inconsistent pilot count alpha = {alpha}")]
    InvalidPilotCount { alpha: i64 },

    #[error("index set has {size} rows but Q = {q} are required")]
    IndexSetTooSmall { size: usize, q: usize },

    #[error("no complement partition exists for the witness column range")]
    NoPartition,

    #[error("witness nullspace for block {block} has dimension {dim}, expected {expected}")]
    NullspaceDimension {
        block: usize,
        dim: usize,
        expected: usize,
    },

    #[error("witness condition (b) fails: q_{row}^T s_{block} vanishes")]
    ConditionB { block: usize, row: usize },

    #[error("Laplace reduction stalled with {remaining} eliminable columns left")]
    ReductionStalled { remaining: usize },

    #[error("determinant mismatch: |det J4| = {direct:e}, product formula = {formula:e}")]
    DeterminantMismatch { direct: f64, formula: f64 },

    #[error("det J4 is suspected to vanish identically")]
    SuspectedZero,

    #[error("sample count {n} below minimum {min}")]
    TooFewSamples { n: usize, min: usize },

    #[error("invalid SNR {0}: must be positive and finite")]
    InvalidSnr(f64),

    #[error("SNR grid must be strictly increasing with at least 4 points")]
    InvalidGrid,

    #[error("non-finite estimate for {0}")]
    NonFinite(String),

    #[error("malformed correlation file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[ConfigViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
