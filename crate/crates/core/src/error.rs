use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration field failed validation.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// A numerical routine failed where it is guaranteed to succeed; this
    /// indicates a defect rather than bad input.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}
