use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a permutation of 1..={n}: {detail}")]
    InvalidPermutation { n: usize, detail: String },

    #[error("factor tuple out of range at position {position}: {value} not in 1..={position}")]
    InvalidFactor { position: usize, value: usize },

    #[error("size limit exceeded: {what} (requested {requested}, limit {limit})")]
    SizeLimit {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),

    #[error("XOR oracle needs a power-of-two domain, got {0}")]
    NotPowerOfTwo(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("state precondition violated: {0}")]
    Precondition(String),

    #[error("power iteration did not converge after {iterations} steps: norm in [{lower}, {estimate}]")]
    NotConverged {
        iterations: usize,
        lower: f64,
        estimate: f64,
    },

    #[error("unknown suite: {0}")]
    UnknownSuite(String),

    #[error("circuit parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("report output: {0}")]
    Io(#[from] std::io::Error),

    #[error("report encoding: {0}")]
    Json(#[from] serde_json::Error),

    #[error("report encoding: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
