use std::fmt;
use std::path::Path;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Solver(String),
    Verification(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Solver(m) => write!(f, "solver did not converge: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<tightwin::Error> for CliError {
    fn from(e: tightwin::Error) -> Self {
        use tightwin::Error as E;
        match e {
            E::Format(m) => CliError::Io(m),
            E::NotTight { .. } => CliError::Verification(e.to_string()),
            E::SingularSystem { .. } | E::ZeroBlock { .. } | E::StaleSystem => CliError::Solver(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
