//! Crate-wide error type.

/// Errors raised by construction and evaluation routines.
///
/// Numeric payloads are carried as `f64` regardless of the scalar the
/// computation ran in; they are diagnostic only.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mode index {mode} out of range for a {n_modes}-mode layout")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("layouts do not match: {0}")]
    LayoutMismatch(String),

    #[error("matrix is not Hermitian (max |M - M†| element = {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("observables do not commute (max commutator element = {residual:.3e})")]
    NonCommuting { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation tail probability {tail:.3e} exceeds the allowed {limit:.1e}")]
    TruncationTail { tail: f64, limit: f64 },

    #[error("probability {value:.3e} is negative beyond round-off tolerance")]
    NegativeProbability { value: f64 },

    #[error("probabilities sum to {total} instead of 1")]
    ProbabilityNotNormalized { total: f64 },

    #[error("cannot condition on an outcome with probability {value:.3e} < 1e-12")]
    ConditioningOnNullOutcome { value: f64 },

    #[error("axis {0} not present in the distribution")]
    AxisOutOfRange(usize),

    #[error("expectation value has non-negligible imaginary part {imag:.3e}")]
    ImaginaryResidue { imag: f64 },

    #[error("spectral outcome {index} is degenerate; no single eigenvector exists")]
    DegenerateOutcome { index: usize },

    #[error("violation margin is not monotone over the scan grid")]
    NotMonotone,

    #[error("{0} region is empty; conditional moments are undefined")]
    EmptyRegion(&'static str),

    #[error("hidden-variable ensemble is missing an assignment: {0}")]
    MissingAssignment(String),

    #[error("malformed table: {0}")]
    MalformedTable(String),

    #[error("construction would need {atoms} explicit atoms (limit {limit})")]
    TableTooLarge { atoms: u128, limit: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
