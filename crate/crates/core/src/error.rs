use thiserror::Error;

/// Errors raised across the library. Variants map onto CLI exit codes:
/// configuration problems (2), data problems (3), numerical failures (4).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A feature outside the supported envelope (e.g. `d > 3`, degree above `kmax`).
    #[error("unsupported: {0}")]
    Capability(String),
    /// An argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A documented precondition did not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Too few observations to support an estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// Malformed input data (CSV schema, missing columns).
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capability(_) | Error::Precondition(_) | Error::Domain(_) => 2,
            Error::InsufficientData(_) | Error::Data(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}
