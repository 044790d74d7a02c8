use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },

    #[error("propagation failed in segment `{segment}`: {reason}")]
    Propagation { segment: String, reason: String },

    #[error("measurement failed: {0}")]
    Measurement(String),

    #[error("branch frames differ: {0}")]
    FrameMismatch(String),

    #[error("incomplete tomography data: {0}")]
    IncompleteBasis(String),

    #[error("round {round}: {source}")]
    InRound {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn param(field: impl Into<String>, reason: impl Into<String>) -> Error {
        Error::InvalidParam {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable category used for CLI error prefixes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::InvalidParam { .. } => "invalid_param",
            Error::Propagation { .. } => "propagation",
            Error::Measurement(_) => "measurement",
            Error::FrameMismatch(_) => "frame_mismatch",
            Error::IncompleteBasis(_) => "incomplete_basis",
            Error::InRound { source, .. } => source.kind(),
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
