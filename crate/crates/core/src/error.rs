use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sequence not defined on [{lo}, {hi}]")]
    Window { lo: i64, hi: i64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("gcd(p, q) = {0}, expected coprime period data")]
    NotCoprime(i64),
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("not supported: {0}")]
    Unsupported(String),
    #[error("cannot decide: {0}")]
    Undecidable(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
