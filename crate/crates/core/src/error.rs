use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet must have at least two symbols, got {0}")]
    InvalidAlphabet(usize),

    #[error("symbol {symbol} is outside the alphabet of size {size}")]
    InvalidSymbol { symbol: usize, size: usize },

    #[error("operation requires a non-empty word")]
    EmptyWord,

    #[error("words have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("enumeration budget exceeded: {requested} words requested, limit is {limit}")]
    BudgetExceeded { requested: u128, limit: u64 },

    #[error("matrix is numerically singular (smallest/largest singular value = {ratio:e})")]
    NumericallySingular { ratio: f64 },

    #[error("map {index} is not contractive (operator norm {norm})")]
    NotContractive { index: usize, norm: f64 },

    #[error("invalid iterated function system: {0}")]
    InvalidIfs(String),

    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
