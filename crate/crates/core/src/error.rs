use thiserror::Error;

/// Errors raised by the operator, channel, entropy and coding layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("subsystem index {index} out of range for {count} subsystems")]
    SubsystemOutOfRange { index: usize, count: usize },

    #[error("operator is not Hermitian (|X - X^dag|_2 = {0:e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace {0} exceeds 1")]
    TraceTooLarge(f64),

    #[error("basis is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("not a bijection of 0..{0}")]
    NotBijection(usize),

    #[error("indices must be distinct, got i = j = {0}")]
    EqualIndices(usize),

    #[error("target dimension {available} cannot support rank {required}")]
    DimensionTooSmall { required: usize, available: usize },

    #[error("map is not trace preserving (deviation {0:e})")]
    NotTracePreserving(f64),

    #[error("map is not completely positive")]
    NotCompletelyPositive,

    #[error("channel has no classical-quantum structure (off-diagonal weight {0:e})")]
    NotCq(f64),

    #[error("state is not classically coherent (off-support weight {0:e})")]
    NotClassicallyCoherent(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("smoothing parameter {eps} out of range: {reason}")]
    EpsOutOfRange { eps: f64, reason: String },

    #[error("dimension {dim} exceeds cap {cap}")]
    CapExceeded { dim: usize, cap: usize },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
