use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A network or run was configured with inconsistent shapes or values.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called in a state or with arguments it does not accept.
    #[error("usage error: {0}")]
    Usage(String),

    /// A gene sequence cannot be mapped onto a working network.
    #[error("infeasible phenotype: {0}")]
    InfeasiblePhenotype(String),

    /// A non-finite value appeared during training.
    #[error("training diverged at layer {layer}: {reason}")]
    Divergence { layer: usize, reason: String },

    /// Linear-algebra failure inside the Fréchet metric.
    #[error("metric error: {0}")]
    Metric(String),

    /// A malformed input file.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
