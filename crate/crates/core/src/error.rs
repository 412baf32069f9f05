use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("root solve for s*g(s) = {target} did not converge in {iterations} iterations (residual {residual:e})")]
    Inversion {
        target: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("picard iteration did not converge at t = {time}: update history {history:?}")]
    Picard { time: f64, history: Vec<f64> },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("weighted integral not admissible: {0}")]
    Admissibility(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("run directory incomplete: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. } | Error::Config(_) | Error::Expr(_) | Error::Domain(_)
        )
    }
}
