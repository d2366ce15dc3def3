use thiserror::Error;

/// Errors raised anywhere in the library. Each variant names the
/// subsystem it comes from so that callers can tag runtime failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("training error: non-finite gradient for parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("training error: non-finite loss at k={k}, batch {batch}")]
    NonFiniteLoss { k: usize, batch: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("step-size error: trajectory left |x| <= {bound} at step {step}; retry with a smaller dt")]
    StepSize { bound: f64, step: usize },

    #[error("convergence error: {what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("degenerate level set: {0}")]
    DegenerateLevelSet(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
