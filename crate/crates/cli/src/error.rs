use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] vastate::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FORMAT: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_INPUT: i32 = 6;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use vastate::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                E::Format(_) => EXIT_FORMAT,
                E::Numeric(_) | E::Stability(_) | E::UndefinedMetric(_) => EXIT_NUMERIC,
                E::Io { .. } => EXIT_IO,
                E::Dimension(_) | E::Input(_) | E::State(_) | E::Compatibility(_) => EXIT_INPUT,
            },
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
