use thiserror::Error;

/// Errors raised by the numerical engine.
///
/// Variants fall in two classes: input problems (bad specs, points outside
/// the domain, invalid parameters) and solver problems (non-convergence,
/// degenerate sampling). [`Error::is_validation`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("point {0:?} is not inside the domain")]
    OutsideDomain(Vec<f64>),

    #[error("degenerate sampling: {0}")]
    DegenerateSampling(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    /// True for errors caused by the caller's input rather than by a solver.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::DimensionMismatch { .. }
                | Error::OutsideDomain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
