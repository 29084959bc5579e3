use thiserror::Error;

/// Failures raised by the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is singular to working precision at pivot {pivot_index} (|pivot| = {pivot_magnitude:e})")]
    Singular {
        pivot_index: usize,
        pivot_magnitude: f64,
    },

    #[error("iterate {step} is ill-conditioned (pivot ratio {pivot_ratio:e})")]
    IllConditionedIterate { step: usize, pivot_ratio: f64 },

    #[error("column {index} has zero norm")]
    ZeroColumn { index: usize },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("eigendecomposition oracle failed: {0}")]
    Oracle(String),

    #[error("matrix is numerically defective (eigenvector condition {condition:e})")]
    Defective { condition: f64 },

    #[error("eigenvalue count is ambiguous: trace of the sign estimate is {trace}")]
    AmbiguousCount { trace: f64 },

    #[error("no balanced splitting line exists on the grid")]
    NoBalancedSplit,

    #[error("deflation sanity check failed: {0}")]
    DeflateSanity(String),

    #[error("shattering failed after {attempts} attempts: {reason}")]
    ShatterFailed { attempts: usize, reason: String },

    #[error("norm bound violated: ‖A‖ = {norm} exceeds {limit}")]
    NormGrowth { norm: f64, limit: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures that a fresh random draw may avoid.
    pub fn is_probabilistic(&self) -> bool {
        matches!(
            self,
            Error::AmbiguousCount { .. }
                | Error::NoBalancedSplit
                | Error::DeflateSanity(_)
                | Error::ShatterFailed { .. }
                | Error::IllConditionedIterate { .. }
                | Error::Singular { .. }
                | Error::NormGrowth { .. }
        )
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Io(_) => 3,
            e if e.is_probabilistic() => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
