use std::fmt;

/// Exit statuses of the command-line tool.
pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

#[derive(Debug)]
pub enum RunError {
    /// Bad flags, unreadable or malformed input.
    Usage(String),
    Io { path: String, source: std::io::Error },
    Core(mflq::Error),
    /// A verification step ran but its check failed.
    Failed(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) | RunError::Io { .. } => EXIT_USAGE,
            RunError::Core(e) if e.is_precondition() => EXIT_PRECONDITION,
            RunError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            // shape and value errors come from the problem file or overrides
            RunError::Core(_) => EXIT_USAGE,
            RunError::Failed(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Usage(m) => write!(f, "{m}"),
            RunError::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => {
                write!(f, "file not found: {path}")
            }
            RunError::Io { path, source } => write!(f, "{path}: {source}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Failed(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<mflq::Error> for RunError {
    fn from(e: mflq::Error) -> Self {
        RunError::Core(e)
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;
