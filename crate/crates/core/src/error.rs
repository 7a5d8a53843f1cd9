use thiserror::Error;

/// Errors raised by divergence computations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("linear part is singular")]
    Singular,

    #[error("non-positive eigenvalue {0}")]
    NonPositiveEigenvalue(f64),

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no closed form for {what}; available: {available}")]
    NoClosedForm { what: String, available: String },

    #[error("scale matrices differ (relative difference {0:.3e})")]
    UnequalScale(f64),

    #[error("non-finite summand {value} at sample {index} (x = {sample:?})")]
    NonFiniteSummand {
        value: f64,
        index: usize,
        sample: Vec<f64>,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("quadrature did not converge after {intervals} intervals (estimate {estimate}, error {error:.3e})")]
    QuadratureNonConvergence {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("fit did not converge: {0}")]
    FitNonConvergence(String),

    #[error("degenerate table: {0}")]
    DegenerateTable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by the caller's input rather than by numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteSummand { .. }
                | Error::NonFinite(_)
                | Error::QuadratureNonConvergence { .. }
                | Error::FitNonConvergence(_)
        )
    }

    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotSquare { .. } => "not_square",
            Error::NotSymmetric(_) => "not_symmetric",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::Singular => "singular",
            Error::NonPositiveEigenvalue(_) => "non_positive_eigenvalue",
            Error::UnknownGenerator(_) => "unknown_generator",
            Error::UnknownFamily(_) => "unknown_family",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NoClosedForm { .. } => "no_closed_form",
            Error::UnequalScale(_) => "unequal_scale",
            Error::NonFiniteSummand { .. } => "non_finite_summand",
            Error::NonFinite(_) => "non_finite",
            Error::QuadratureNonConvergence { .. } => "quadrature_non_convergence",
            Error::FitNonConvergence(_) => "fit_non_convergence",
            Error::DegenerateTable(_) => "degenerate_table",
        }
    }
}
