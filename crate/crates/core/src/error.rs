use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
///
/// Variants name the invariant that failed so callers (the CLI in
/// particular) can surface it directly.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not symmetric: |M[{i}][{j}] - M[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not positive definite (pivot/eigenvalue {value:e} <= tolerance {tol:e})")]
    NotPositiveDefinite { value: f64, tol: f64 },

    #[error("matrix has a negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),

    #[error("kept eigenvalue {value:e} at index {index} is too small to invert")]
    SmallEigenvalue { index: usize, value: f64 },

    #[error(
        "graph filter is singular (smallest eigenvalue {min_eig:e}); use the truncated estimator"
    )]
    SingularFilter { min_eig: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("kernel row {0} sums to zero")]
    ZeroRow(usize),

    #[error("{what} did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iters: usize,
        residual: f64,
    },

    #[error("sampling mask selects no samples")]
    EmptyMask,

    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("signal contains a non-finite value at index {0}")]
    NonFinite(usize),

    #[error("malformed PGM: {0}")]
    Pgm(String),

    #[error("malformed table: {0}")]
    Table(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short name of the property that failed.
    pub fn invariant(&self) -> &'static str {
        match self {
            Error::NotSymmetric { .. } => "symmetry",
            Error::NotSquare { .. } => "square matrix",
            Error::NotPositiveDefinite { .. } => "positive definiteness",
            Error::NegativeEigenvalue(_) => "positive semi-definiteness",
            Error::SmallEigenvalue { .. } | Error::SingularFilter { .. } => "filter invertibility",
            Error::DimensionMismatch { .. } => "dimension agreement",
            Error::InvalidConfig(_) => "valid configuration",
            Error::ZeroRow(_) => "positive kernel rows",
            Error::NoConvergence { .. } => "convergence",
            Error::EmptyMask => "non-empty sampling mask",
            Error::WeightSum(_) => "weights sum to one",
            Error::NonFinite(_) => "finite values",
            Error::Pgm(_) => "well-formed PGM input",
            Error::Table(_) => "well-formed table",
            Error::Io(_) => "i/o",
        }
    }

    /// Errors caused by the caller's input rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidConfig(_) | Error::Pgm(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
