use thiserror::Error;

/// Errors raised by density evaluation, sampling and the Monte Carlo harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine could not reach its accuracy target.
    #[error("accuracy error: {what} (achieved error bound {bound:e})")]
    Accuracy { what: String, bound: f64 },

    /// The stretched-bridge sampler used up its attempt budget.
    #[error(
        "rejection exhausted after {attempts} attempts (empirical acceptance rate {acceptance_rate:e})"
    )]
    RejectionExhausted { attempts: u64, acceptance_rate: f64 },

    /// A quantity diverges for the requested parameters (e.g. L_b at alpha = 2).
    #[error("divergence: {0}")]
    Divergence(String),

    /// A root finder or continuation could not resolve a structure.
    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("I/O error: {0}")]
    Io(String),

    /// A Monte Carlo run stopped early; `completed` paths finished before `source`.
    #[error("{source} (after {completed} of {total} paths)")]
    Partial {
        completed: usize,
        total: usize,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Stable numeric class, used as a process exit code by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) => 2,
            Error::Accuracy { .. } => 3,
            Error::RejectionExhausted { .. } => 4,
            Error::Divergence(_) => 5,
            Error::Resolution(_) => 6,
            Error::Io(_) => 7,
            Error::Partial { source, .. } => source.exit_code(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
