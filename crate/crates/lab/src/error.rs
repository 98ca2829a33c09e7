use std::io;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Config text rejected; `line` is 0 for command-line overrides and defaults.
    #[error("line {line}, key `{key}`: {message}")]
    Parse { line: usize, key: String, message: String },
    #[error(transparent)]
    Core(#[from] finsler_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{what} at ell = {ell} did not converge: residual {residual:e} above {threshold:e}")]
    NotConverged { what: &'static str, ell: f64, residual: f64, threshold: f64 },
    #[error("{0}")]
    Input(String),
}

impl Error {
    pub(crate) fn parse(line: usize, key: &str, message: impl Into<String>) -> Self {
        Error::Parse { line, key: key.to_string(), message: message.into() }
    }

    /// Process exit status: 2 for failed numerical certification, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotConverged { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
