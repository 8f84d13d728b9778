use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter violates its contract. `field` names the offending input.
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("{quantity} out of domain: {reason}")]
    Domain { quantity: &'static str, reason: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("z = {0} cm is not on the trace grid")]
    OffGrid(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn domain(quantity: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain { quantity, reason: reason.into() }
    }
}
