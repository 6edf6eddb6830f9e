use crate::model::ValidationReport;

pub type Result<T, E = BgkError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum BgkError {
    #[error("vacuum state: density {density:e} is below the positivity threshold")]
    Vacuum { density: f64 },

    #[error("degenerate moments: {0}")]
    Degenerate(String),

    #[error("Maxwellian projection did not converge after {iterations} iterations (residual {residual:e})")]
    ProjectionFailed { iterations: usize, residual: f64 },

    #[error("target not representable on the velocity grid: {0}")]
    GridSupport(String),

    #[error("velocity grids do not match")]
    GridMismatch,

    #[error("invalid velocity grid: {0}")]
    InvalidGrid(String),

    #[error("reference distribution vanishes where the distribution is positive (node {node})")]
    SupportViolation { node: usize },

    #[error("time step {dt} violates the stability limit: {reason}")]
    StepSize { dt: f64, reason: String },

    #[error("inadmissible interaction parameters:\n{0}")]
    Inadmissible(ValidationReport),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dump format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
