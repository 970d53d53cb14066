use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Fock index {n} exceeds cutoff n_max = {n_max}")]
    Cutoff { n: usize, n_max: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mode {mode} out of range for {modes} modes")]
    ModeIndex { mode: usize, modes: usize },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("degenerate Gaussian channel: {0}")]
    DegenerateChannel(String),
    #[error("map is not phase invariant (defect {0:.3e})")]
    NotPhaseInvariant(f64),
    #[error("phase-space grids do not match")]
    GridMismatch,
    #[error("Kraus set is empty")]
    EmptyKraus,
    #[error("physicality gate failed: {0}")]
    Unphysical(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
