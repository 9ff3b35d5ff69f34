use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("spectral function is not finite at eigenvalue {eigenvalue}")]
    SingularMatrix { eigenvalue: f64 },
    #[error("matrix is not positive definite (eigenvalue {eigenvalue})")]
    NotPositiveDefinite { eigenvalue: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("invalid mixture model: {0}")]
    InvalidModel(String),
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("covariance is rank deficient (min eigenvalue {min_eigenvalue:e} below {tol:e})")]
    RankDeficient { min_eigenvalue: f64, tol: f64 },
    #[error("invalid time {0}")]
    InvalidTime(f64),
    #[error("schedule singular at t = {0:e}: sigma_t below t_min cutoff")]
    ScheduleSingular(f64),
    #[error("normal-equation system is singular (pivot {pivot:e})")]
    SingularSystem { pivot: f64 },
    #[error("training diverged at step {step} (loss {loss:e})")]
    Diverged { step: usize, loss: f64 },
    #[error("non-finite state in reverse integration at step {step}")]
    NumericalBlowup { step: usize },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("degenerate regime: {rejected} of {attempted} datasets rejected as rank deficient")]
    DegenerateRegime { rejected: usize, attempted: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Short variant name, used for named check failures in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMatrix(_) => "InvalidMatrix",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::InvalidModel(_) => "InvalidModel",
            Error::EmptyClass(_) => "EmptyClass",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::InvalidTime(_) => "InvalidTime",
            Error::ScheduleSingular(_) => "ScheduleSingular",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::Diverged { .. } => "Diverged",
            Error::NumericalBlowup { .. } => "NumericalBlowup",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::DegenerateRegime { .. } => "DegenerateRegime",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}
