use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or config field failed validation.
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },

    /// Unknown key or section in a config file.
    #[error("unknown config {what} `{name}` (line {line})")]
    UnknownKey {
        what: &'static str,
        name: String,
        line: usize,
    },

    /// A requested operating point cannot be met (e.g. zero success
    /// probability).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An iterative solver ran out of its iteration budget.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A configured assertion gate did not hold after a run.
    #[error("gate failed: {0}")]
    Gate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}
