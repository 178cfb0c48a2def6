use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("infinite regret: information matrix is singular at t = {t}")]
    InfiniteRegret { t: usize },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e}); {context}")]
    NonConvergence { solver: &'static str, iterations: usize, residual: f64, context: String },

    #[error("degenerate estimate: |b_hat| = {b_hat:e} is below the floor")]
    DegenerateEstimate { b_hat: f64 },

    #[error("invalid simulation input: {0}")]
    InvalidSimulation(String),

    #[error("all {count} realizations diverged")]
    AllDiverged { count: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
