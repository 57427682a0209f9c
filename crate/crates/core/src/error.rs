use thiserror::Error;

/// Errors raised by the capacity pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or malformed configuration (grids, thresholds, geometry input).
    #[error("configuration error: {0}")]
    Config(String),

    /// A regime-specific formula was requested outside its regime.
    #[error("regime error: {0}")]
    Regime(String),

    /// The asymptotic spectrum has no closed form for this input.
    #[error("no closed form: {0}")]
    NoClosedForm(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// SVD or root-finding failure.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A transmissivity exceeded one by more than roundoff.
    #[error("physicality violation: {0}")]
    Physicality(String),

    #[error("no channel: every transmissivity is zero")]
    NoChannel,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::Physicality(_) | Error::NoChannel => 4,
            _ => 2,
        }
    }
}
