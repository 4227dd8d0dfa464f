use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or argument.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Power allocation has no nonnegative solution, or the linear system is too
    /// ill-conditioned to trust.
    #[error("infeasible power allocation: {0}")]
    Infeasible(String),

    /// A moment matrix lost positive definiteness at working precision.
    #[error("numerical conditioning: {0}")]
    Conditioning(String),

    /// Reciprocal or square root of a series with a non-positive constant term.
    #[error("series domain error: {0}")]
    Domain(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True for errors caused by the configuration rather than the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Input(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
