use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter combination the model does not support.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Not enough free resources to place an allocation.
    #[error("scheduling error: {0}")]
    Scheduling(String),
    /// A value violating a type invariant.
    #[error("validation error: {0}")]
    Validation(String),
    /// A failure while a valid configuration was being executed.
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
