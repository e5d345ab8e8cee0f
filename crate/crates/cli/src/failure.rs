use seqclf_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A verification or gradient check did not pass.
    #[error("{0}")]
    Check(String),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub const CHECK: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const DATA: u8 = 3;

    pub fn code(&self) -> u8 {
        match self {
            CliError::Check(_) => Self::CHECK,
            CliError::Usage(_) => Self::USAGE,
            CliError::Data(_) => Self::DATA,
            CliError::Core(e) => match e {
                Error::Config(_) | Error::UnknownModel(_) | Error::Build(_) => Self::USAGE,
                Error::Dataset(_)
                | Error::Schema(_)
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::Csv(_) => Self::DATA,
                _ => Self::CHECK,
            },
        }
    }
}

/// Errors in a config file are the caller's usage, not the data's.
pub fn as_usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}
