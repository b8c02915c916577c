use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("symmetry error: {0}")]
    Symmetry(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("model validation failed: {0}")]
    Validation(String),

    #[error("assembly error in constraint `{constraint}` at block ({row},{col}): {msg}")]
    Assembly {
        constraint: String,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("export error: {0}")]
    Export(String),

    #[error("missing variable `{0}` in assignment")]
    MissingVariable(String),

    #[error("gain extraction error: {0}")]
    Extraction(String),

    #[error("simulation failure at t={time}: {kind}")]
    Simulation { kind: SimFailure, time: f64 },

    #[error("signal error: {0}")]
    Signal(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// What went wrong while integrating the closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimFailure {
    /// The algebraic subsystem became singular (no consistent solution).
    AlgebraicSingular,
    /// A state or derivative went non-finite.
    Divergence,
}

impl std::fmt::Display for SimFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimFailure::AlgebraicSingular => write!(f, "algebraic solve singular"),
            SimFailure::Divergence => write!(f, "non-finite state (divergence)"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
