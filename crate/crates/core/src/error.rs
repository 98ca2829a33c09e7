use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    /// Exact-mode gradient requested where the norm is not differentiable.
    #[error("norm is not differentiable at the requested point")]
    SingularPoint,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("region contains no simplices")]
    EmptyRegion,
    #[error("need at least 3 positive points for a fit, got {usable} ({dropped} dropped)")]
    TooFewPoints { usable: usize, dropped: usize },
    #[error("norm descriptor error at byte {position}: {message}")]
    Descriptor { position: usize, message: String },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
