use thiserror::Error;

/// Errors raised across the workbench.
///
/// Variants map onto the CLI exit codes: configuration, validation, domain and
/// parse problems are user errors (exit 1); the numerical variants are exit 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("metric is not positive definite at x = {coords:?} (leading minor {minor} = {value:e})")]
    NotPositiveDefinite {
        coords: Vec<f64>,
        minor: usize,
        value: f64,
    },
    #[error("singular point at node {node} (x = {coords:?}): {reason}")]
    SingularPoint {
        node: usize,
        coords: Vec<f64>,
        reason: String,
    },
    #[error("structural failure: {0}")]
    Structural(String),
    #[error("solver did not converge after {iterations} iterations (last residual {last_residual:e})")]
    NonConvergence {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },
    #[error("regularization too small: {0}")]
    Regularization(String),
    #[error("coordinate construction failed: {0}")]
    Coordinates(String),
    #[error("map inversion failed at {} image nodes (first: {:?})", .nodes.len(), .nodes.first())]
    Transform { nodes: Vec<usize> },
    #[error("pipeline error: {0}")]
    Pipeline(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code: 1 for validation-type failures, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Validation(_)
            | Error::Domain(_)
            | Error::Unsupported(_)
            | Error::NotPositiveDefinite { .. }
            | Error::Parse { .. }
            | Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
