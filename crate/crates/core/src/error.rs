use thiserror::Error;

/// Errors raised by the library.
///
/// Precondition failures are `Domain` or `InvalidParams`; constructions asked
/// to run below their feasibility cutoff return `Infeasible`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {func}: {msg}")]
    Domain { func: &'static str, msg: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(
        "{method} infeasible: a/sigma = {snr} is below the {cutoff_name} cutoff {cutoff}; \
         no valid sparse confidence set exists there"
    )]
    Infeasible {
        method: &'static str,
        snr: f64,
        cutoff_name: &'static str,
        cutoff: f64,
    },

    #[error("{0}")]
    Regime(String),

    #[error("threshold {name} undefined: {msg}")]
    DegenerateThreshold { name: &'static str, msg: String },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("csv line {line}: {msg}")]
    Csv { line: u64, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(func: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            func,
            msg: msg.into(),
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. } | Error::Regime(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
