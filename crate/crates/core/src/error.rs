use thiserror::Error;

use crate::quadrature::QuadError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("{0} kernel is distributional in time; evaluate corr_F instead")]
    DistributionalKernel(&'static str),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("expected a {expected} model, got {found}")]
    WrongModel {
        expected: &'static str,
        found: &'static str,
    },
    #[error("covariance not positive semidefinite at t = {t:e}: min eigenvalue {min_eigenvalue:e}, trace {trace:e}")]
    NotPsd {
        t: f64,
        min_eigenvalue: f64,
        trace: f64,
    },
    #[error("divergent quantity: {0}")]
    Divergent(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Coarse classification used for process exit codes and the C interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    NonConvergence,
    Psd,
    Io,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Quadrature(QuadError::NotConverged { .. })
            | Error::Quadrature(QuadError::NonFinite { .. }) => ErrorCategory::NonConvergence,
            Error::NotPsd { .. } => ErrorCategory::Psd,
            Error::Io(_) => ErrorCategory::Io,
            _ => ErrorCategory::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
