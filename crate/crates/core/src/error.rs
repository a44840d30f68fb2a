use thiserror::Error;

/// Errors raised by the design, analysis and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("infeasible target: {0}")]
    Infeasible(String),

    #[error("objective {objective} cannot be used with the {branch} design branch")]
    Dispatch { objective: String, branch: String },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("trial {trial} at point {point}: {source}")]
    Trial {
        point: usize,
        trial: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::Numerical(msg.into())
}
