use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or experiment description violates one of its invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke a documented precondition (index out of range,
    /// action outside the polytope, t < 1, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The model itself is unusable for the requested quantity, e.g. a
    /// reducible chain has no unique stationary distribution.
    #[error("model error: {0}")]
    Model(String),

    #[error("unknown preset {0:?} (expected one of 1a, 1b, 2a, 2b)")]
    UnknownPreset(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed config: {0}")]
    Parse(String),

    #[error("run failed (child seed {seed:#018x}): {message}")]
    Run { seed: u64, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
