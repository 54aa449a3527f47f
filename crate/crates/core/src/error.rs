use thiserror::Error;

/// Errors produced by the synchronization toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// The agent model violates a standing assumption (stabilizability,
    /// detectability, or spectrum in the closed unit disc).
    #[error("model assumption violated: {0}")]
    Assumption(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("delay bound inadmissible: kappa_bar * omega_max = {product:.6} >= pi/2")]
    InadmissibleDelay { product: f64 },

    #[error("design stage `{stage}` failed: {source}")]
    Design {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("design failure: {0}")]
    DesignFailure(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("certificate sizing error: {evaluations} grid evaluations exceed limit {limit}")]
    Sizing { evaluations: u64, limit: u64 },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Design {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
