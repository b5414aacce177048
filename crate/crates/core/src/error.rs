use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("power iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("invalid hypothesis class: {0}")]
    InvalidSpec(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("adaptive quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("gradient check failed: leaf {leaf} coordinate {index}: analytic {analytic:e} vs numeric {numeric:e} (rel err {rel_err:e})")]
    CheckFailed {
        leaf: String,
        index: usize,
        analytic: f64,
        numeric: f64,
        rel_err: f64,
    },

    #[error("bad IDX magic number in {0}")]
    BadMagic(String),

    #[error("truncated IDX file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },

    #[error("unsupported IDX type code {0:#04x} (only unsigned byte is supported)")]
    UnsupportedTypeCode(u8),

    #[error("CSV schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
