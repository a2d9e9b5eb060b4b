use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated an operation's preconditions (shapes, sizes, names).
    #[error("usage error: {0}")]
    Usage(String),
    /// A factorization or optimization could not produce a usable result.
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    /// A replicate of an AL experiment failed.
    #[error("strategy {strategy}, replicate {replicate} (seed {seed}): {source}")]
    Replicate {
        strategy: String,
        replicate: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
