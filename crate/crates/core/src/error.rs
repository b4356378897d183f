//! Error taxonomy shared by every module of the toolkit.

use thiserror::Error;

/// Unified error type. Variants map onto the process exit codes used by the
/// command-line frontend: config/geometry/domain -> 2, numeric -> 3,
/// resource -> 4.
#[derive(Error, Debug)]
pub enum Error {
    /// Invalid or inconsistent user-supplied configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Geometrically impossible lattice or array request.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A computation would exceed a configured resource cap.
    #[error("resource cap exceeded in {what}: required {required}, cap {cap}")]
    Resource {
        what: String,
        required: usize,
        cap: usize,
    },

    /// Numerical failure: non-convergence, loss of precision, singularity.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Domain violation detected at a module boundary.
    #[error("domain error: {0}")]
    Domain(String),

    /// Compilation failed; carries the diagnostic trail when one exists.
    #[error("compilation error: {0}")]
    Compilation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn compilation(msg: impl Into<String>) -> Self {
        Error::Compilation(msg.into())
    }
}
