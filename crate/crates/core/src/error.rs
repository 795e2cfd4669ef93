use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants fall into two families: contract violations by the caller
/// (bad indices, malformed input, out-of-window queries) and numeric
/// failures (singular matrices, non-convergent quadrature). The CLI maps the
/// first family to exit status 2 and the second to exit status 3, see
/// [`Error::is_numeric`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("basis index {index} outside 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("argument {0} outside [0, 1]")]
    OutsideUnitInterval(f64),

    #[error("user-supplied basis is not orthonormal: gram entry ({row}, {col}) = {value}")]
    NotOrthonormal { row: usize, col: usize, value: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("non-finite score at observation {observation}, component {component}")]
    NonFiniteScore {
        observation: usize,
        component: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {gap}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {0})")]
    NotPositiveDefinite(f64),

    #[error(
        "second-moment matrix is singular: smallest eigenvalue {smallest} vs largest {largest}"
    )]
    Singular { smallest: f64, largest: f64 },

    #[error(
        "null mean check failed for component {component}: mean {mean} exceeds 4 standard errors ({standard_error})"
    )]
    NonZeroNullMean {
        component: usize,
        mean: f64,
        standard_error: f64,
    },

    #[error("too few draws: {draws} < {required}")]
    TooFewDraws { draws: usize, required: usize },

    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("non-finite penalized statistic at dimension {0}")]
    NonFinitePenalized(usize),

    #[error("y = {y} outside the majorant window [{lower}, {upper}] for k = {k}")]
    OutsideWindow {
        k: usize,
        y: f64,
        lower: f64,
        upper: f64,
    },

    #[error("vanishing denominator at y = {0}")]
    VanishingDenominator(f64),

    #[error("quadrature did not converge on [{lower}, {upper}]")]
    QuadratureNonConvergence { lower: f64, upper: f64 },

    #[error("singular information block")]
    SingularInformation,

    #[error("maximum likelihood fit failed: {0}")]
    MleFailure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("replication {index}: {source}")]
    Replication { index: usize, source: Box<Error> },
}

impl Error {
    /// True for numeric failures as opposed to caller/input errors.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NotPositiveDefinite(_)
            | Error::Singular { .. }
            | Error::NonZeroNullMean { .. }
            | Error::NonFinitePenalized(_)
            | Error::VanishingDenominator(_)
            | Error::QuadratureNonConvergence { .. }
            | Error::SingularInformation
            | Error::MleFailure(_) => true,
            Error::Replication { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
