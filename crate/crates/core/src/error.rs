use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum VnrError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A named measure, variable or state does not exist.
    #[error("lookup error: {0}")]
    Lookup(String),
    /// Input data violates a structural invariant.
    #[error("validation error at {field}: {message}")]
    Validation { field: String, message: String },
    /// The requested quantity is not well defined for the given input.
    #[error("well-posedness error: {0}")]
    WellPosedness(String),
    /// A caller contract was not honoured.
    #[error("contract error: {0}")]
    Contract(String),
    /// A numerical routine broke one of its own invariants.
    #[error("internal invariant breach: {0}")]
    Internal(String),
}

impl VnrError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        VnrError::Validation { field: field.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, VnrError>;
