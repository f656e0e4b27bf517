use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants are grouped by how the command-line
/// front end reports them: usage problems, input validation problems, and
/// numeric failures map to distinct process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent dimensions, invalid parameter combinations, and similar
    /// caller mistakes detected before any numeric work starts.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value outside the domain an operation is defined on
    /// (non-positive temperature, empty episode set, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation produced or would produce non-finite garbage.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Evidence under which every hypothesis has zero posterior mass; the
    /// belief update refuses to renormalize noise.
    #[error("degenerate evidence: {0}")]
    DegenerateEvidence(String),

    /// A trajectory, environment file, or other input failed validation.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Raw observation ingestion could not reconstruct a trajectory.
    #[error("ingestion failed at record {index}: {detail}")]
    Ingest { index: usize, detail: String },

    /// A file exists but its contents are not what they should be.
    #[error("failed to parse {path}: {detail}")]
    Parse { path: String, detail: String },

    /// Random environment generation exhausted its retry budget.
    #[error("environment generation failed: {0}")]
    Generation(String),

    /// Command-line misuse that clap cannot catch on its own.
    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(std::io::Error::other(e))
    }
}

impl Error {
    /// Process exit code for the CLI: 2 usage, 3 validation, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Config(_)
            | Error::Domain(_)
            | Error::Validation(_)
            | Error::Ingest { .. }
            | Error::Parse { .. }
            | Error::Generation(_)
            | Error::Io(_) => 3,
            Error::Numeric(_) | Error::DegenerateEvidence(_) => 4,
        }
    }
}
