use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("term count {count} exceeds the configured cap {cap}")]
    TermCap { count: usize, cap: usize },

    #[error("invalid variable split: {0}")]
    InvalidSplit(String),

    #[error("zero polynomial not allowed here: {0}")]
    ZeroPolynomial(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("resolvent singular: lambda = {lambda} lies in the range of the symbol (min on grid {min_value})")]
    ResolventSingular { lambda: f64, min_value: f64 },

    #[error("sublevel set {{symbol < {lambda}}} is truncated by the frequency box (half-width {half_width})")]
    TruncatedSublevel { lambda: f64, half_width: f64 },

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("grid spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("coefficient field error: {0}")]
    Coefficient(String),

    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("monotonicity violation: {0}")]
    NonMonotone(String),

    #[error("empty spectral slice: {0}")]
    EmptySlice(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
