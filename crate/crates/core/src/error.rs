use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A scalar argument fell outside the domain of the function.
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// A structured input (matrix, state, channel, table) violated an invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A construction has no solution for the requested targets.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Not enough data to form an estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Malformed tabular input; `line` is 1-based and counts the header.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, domain_desc: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        domain: domain_desc,
    }
}
