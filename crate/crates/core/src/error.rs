use thiserror::Error;

/// Failure categories shared by every solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no paths")]
    NoPaths,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("non-finite value at path {path}, step {step}")]
    NonFinite { path: usize, step: usize },
    #[error("singular control weight at grid point {point}: {detail}")]
    SingularWeight { point: usize, detail: String },
    #[error("window violated: {0}")]
    Window(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no contraction at alpha={alpha:.6}: step fell below {min_step:e}")]
    NoContraction { alpha: f64, min_step: f64 },
    #[error("iteration cap of {cap} reached at alpha={alpha:.6} (last distance {last:e})")]
    IterationCap { cap: usize, alpha: f64, last: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for violations of a parameter window or structural precondition.
    pub fn is_precondition(&self) -> bool {
        matches!(self, Error::Window(_) | Error::Precondition(_) | Error::SingularWeight { .. })
    }

    /// True for divergence and other failures of the numerics themselves.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::NoContraction { .. }
                | Error::IterationCap { .. }
                | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
