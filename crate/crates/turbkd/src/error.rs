use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A selection threshold left no probability mass to work with.
    #[error("empty selection: no probability mass above the threshold")]
    EmptySelection,

    /// Decoy intensities or probabilities degenerate (division by zero in a
    /// decoy-state bound).
    #[error("degenerate decoy configuration: {0}")]
    DegenerateDecoy(String),

    /// The asymptotic rate is zero everywhere on (0, 1].
    #[error("no key: the asymptotic rate is zero for every transmittance")]
    NoKey,

    /// Nonlinear least squares did not converge.
    #[error("fit failure: {0}")]
    FitFailure(String),

    /// Calibration polynomial rejected (non-monotone or underdetermined).
    #[error("calibration error: {0}")]
    Calibration(String),

    /// Scenario configuration could not be parsed.
    #[error("config error at {path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
