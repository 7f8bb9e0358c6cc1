use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps variants onto process exit codes: validation and data
/// problems exit 3, numerical/solver failures exit 4, I/O and parse
/// failures exit 5 (usage errors exit 2 via the argument parser).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{field}: {message}")]
    Validation { field: String, message: String },

    #[error("integrand returned a non-finite value at t = {at}")]
    NonFiniteEvaluation { at: f64 },

    #[error("no sign change on [{lo}, {hi}]: g(lo) = {g_lo:e}, g(hi) = {g_hi:e}")]
    NoSignChange { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("root finder hit the iteration cap ({max_iter}) with bracket width {width:e}")]
    MaxIterExceeded { max_iter: u32, width: f64 },

    #[error("bracket expansion around {center} found no sign change after {attempts} doublings")]
    BracketExpansion { center: f64, attempts: u32 },

    #[error("residual changes sign {count} times on [{lo}, {hi}]; expected a single crossing")]
    MultipleCrossings { lo: f64, hi: f64, count: usize },

    #[error("computed {what} is not finite")]
    NonFiniteResult { what: String },

    #[error("self-check failed: {failed} of {total} checks did not hold")]
    CheckFailed { failed: usize, total: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("data: {0}")]
    Data(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), message: message.into() }
    }

    /// Exit-code class used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } | Error::Data(_) | Error::GridMismatch(_) => 3,
            Error::NonFiniteEvaluation { .. }
            | Error::NoSignChange { .. }
            | Error::MaxIterExceeded { .. }
            | Error::BracketExpansion { .. }
            | Error::MultipleCrossings { .. }
            | Error::NonFiniteResult { .. }
            | Error::CheckFailed { .. } => 4,
            Error::Parse { .. } | Error::Io(_) => 5,
        }
    }
}
