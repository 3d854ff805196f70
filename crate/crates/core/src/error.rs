use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A pilot assignment, beamformer set or channel state does not satisfy
    /// the invariants required by the operation it was passed to.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("exhaustive search space {size} exceeds the limit of {limit}")]
    SearchSpace { size: f64, limit: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("{solver} did not converge after {iterations} iterations: {detail}")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        detail: String,
    },

    #[error("RTD iteration {iteration}: {source}")]
    Rtd {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
