use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural precondition (grid exactness, band layout, symmetry) does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A window family leaves a multipole uncovered, so duals cannot be formed.
    #[error("window family does not cover multipole l = {l}")]
    Coverage { l: usize },

    /// An iterative numerical routine did not converge.
    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("matrix is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    /// Malformed input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Precondition,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain(_) | Error::Parse { .. } | Error::Io(_) => ErrorClass::Usage,
            Error::Precondition(_) | Error::Coverage { .. } => ErrorClass::Precondition,
            Error::Numeric(_) | Error::Singular | Error::IllConditioned { .. } => {
                ErrorClass::Numeric
            }
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
