use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible graph parameters: {0}")]
    InfeasibleGraph(String),

    #[error("random regular generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("{what} too large: {got} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not symmetric (deviation {0:.3e})")]
    NotSymmetric(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero norm: {0}")]
    ZeroNorm(String),

    #[error("site set {0:?} is not connected in the graph")]
    Disconnected(Vec<usize>),

    #[error("graph mismatch: {0}")]
    GraphMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("gradient step increased the fixed-message energy from {before} to {after} (gamma = {gamma}); reduce the step size")]
    StepSize { before: f64, after: f64, gamma: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::ZeroNorm(_) | Error::StepSize { .. } => 3,
            Error::GenerationFailed { .. } => 3,
            _ => 2,
        }
    }
}
