use thiserror::Error;

/// Which clause of the construction's rate hypothesis failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Hypothesis {
    /// `R1 - R2 > 0`.
    ListRateBelowMessageRate,
    /// `R1 - R2 < I(P,W)`.
    Verifiable,
    /// `I(P,W) < R1`.
    NonDecodable,
    /// `R1 < H(P)`, i.e. `eps0 > 0`.
    EntropyMargin,
    /// `zeta1(P) > 0`.
    Zeta1Positive,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("channel matrix is empty")]
    EmptyChannel,
    #[error("row {row} has {len} entries, expected {expected}")]
    RaggedRows { row: usize, len: usize, expected: usize },
    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, not 1")]
    RowSumInvalid { row: usize, sum: f64 },
    #[error("rows {first} and {second} are identical")]
    DuplicateRows { first: usize, second: usize },
    #[error("distribution is empty")]
    EmptyDistribution,
    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("distribution sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("block length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("symbol {symbol} out of range for alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { what: &'static str, iterations: usize, residual: f64 },
    #[error("log-ratio variance is infinite for inputs ({x}, {x_prime})")]
    InfiniteVariance { x: usize, x_prime: usize },
    #[error("rate {rate} outside [0, {max}]")]
    RateOutOfRange { rate: f64, max: f64 },
    #[error("average verification error {0} leaves no room for the meta-converse bound")]
    DegenerateEpsilon(f64),
    #[error("invalid code: {0}")]
    InvalidCode(String),
    #[error("enumeration of {required} words exceeds budget {budget}")]
    BudgetExceeded { required: f64, budget: u64 },
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("at least one trial is required")]
    InsufficientTrials,
    #[error("rate hypothesis violated: {0:?}")]
    HypothesisViolated(Hypothesis),
    #[error("unknown player {0}")]
    UnknownPlayer(usize),
    #[error("auction has no bids")]
    EmptyAuction,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
