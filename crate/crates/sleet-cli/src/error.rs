use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, CliError>;

/// Everything that can go wrong between the command line and a report.
#[derive(Debug)]
pub enum CliError {
    /// Filesystem failure, with the path involved.
    Io { path: PathBuf, source: std::io::Error },
    /// A data file failed to parse or validate; `row` is the 1-based data
    /// row (0 for the header).
    Dataset { path: PathBuf, row: usize, message: String },
    /// Configuration problem: contradictory, missing, or extraneous keys.
    Config(String),
    /// A core computation failed outside any specific round.
    Core(sleet_core::Error),
    /// A core computation failed while processing round `t`.
    Round { t: usize, source: sleet_core::Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Dataset { path, row, message } => {
                if *row == 0 {
                    write!(f, "{}: header: {message}", path.display())
                } else {
                    write!(f, "{}: row {row}: {message}", path.display())
                }
            }
            CliError::Config(message) => write!(f, "configuration: {message}"),
            CliError::Core(source) => write!(f, "{source}"),
            CliError::Round { t, source } => write!(f, "round {t}: {source}"),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Io { source, .. } => Some(source),
            CliError::Core(source) | CliError::Round { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<sleet_core::Error> for CliError {
    fn from(source: sleet_core::Error) -> Self {
        CliError::Core(source)
    }
}
