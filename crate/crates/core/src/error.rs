use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("the zero vector has no Rayleigh quotient")]
    ZeroVector,

    #[error("matrix {which} is not symmetric: entries ({row}, {col}) and ({col}, {row}) differ")]
    NotSymmetric {
        which: &'static str,
        row: usize,
        col: usize,
    },

    #[error("matrix {which} is not positive definite")]
    NotPositiveDefinite { which: &'static str },

    #[error("degenerate subspace: {requested} basis vectors have numerical rank {rank}")]
    DegenerateSubspace { requested: usize, rank: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("value {value} lies outside the eigenvalue interval [{lower}, {upper})")]
    Interval { value: f64, lower: f64, upper: f64 },

    #[error("matrix market parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("matrix market validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("iterate is stationary: the residual vanishes")]
    Stationary,

    #[error("degenerate cone geometry: x and its residual are (numerically) parallel")]
    Degenerate2d,
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
