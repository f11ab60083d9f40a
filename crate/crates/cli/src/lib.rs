//! Library backing the `npgm` binary: file formats, command
//! implementations, and the Monte Carlo benchmark drivers.
//!
//! Everything here is deterministic given the full command configuration
//! (including the seed); the rayon thread count never changes any output.
//! All indices in files produced or consumed by the CLI are 1-based; the
//! underlying library is 0-based.

pub mod bench;
pub mod commands;
pub mod format;

/// Errors surfaced to the command line, partitioned by exit code:
/// usage errors exit 2, data errors exit 3, solver failures exit 4.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<npgm::Error> for CliError {
    fn from(err: npgm::Error) -> Self {
        use npgm::Error::*;
        match err {
            InvalidConfig(_) | InvalidEdge { .. } => CliError::Usage(err.to_string()),
            DimensionMismatch { .. }
            | InsufficientSamples { .. }
            | NonFinite { .. }
            | TauOutOfRange { .. } => CliError::Data(err.to_string()),
            _ => CliError::Solver(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Wraps an I/O error with the path it concerns.
pub(crate) fn io_error(path: &std::path::Path, err: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {err}", path.display()))
}
