//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors raised by graph construction, the solvers and the network layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on user input failed (shape, range, finiteness, ...).
    InvalidInput(String),
    /// The graph has a node with zero degree.
    IsolatedNode(usize),
    /// A factorization input was numerically rank deficient.
    RankDeficient(&'static str),
    /// A matrix expected to be symmetric positive definite was not.
    NotSpd,
    /// An embedding iterate lost rank (degenerate `Y^T D Y`).
    DegenerateEmbedding(&'static str),
    /// Neighbor-scheme caches were required but not initialized.
    MissingCaches,
    /// The iteration produced non-finite values.
    Diverged { iteration: usize },
    /// Malformed IDX payload; `offset` is the byte position of the defect.
    Idx { offset: usize, msg: String },
    /// Dense reference computation requested above the size cap.
    OracleCap { n: usize, cap: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::IsolatedNode(i) => write!(f, "isolated node {i} (zero degree)"),
            Error::RankDeficient(what) => write!(f, "rank deficient: {what}"),
            Error::NotSpd => write!(f, "matrix is not symmetric positive definite"),
            Error::DegenerateEmbedding(what) => write!(f, "degenerate embedding: {what}"),
            Error::MissingCaches => write!(f, "neighbor-scheme caches are not initialized"),
            Error::Diverged { iteration } => {
                write!(f, "divergence: non-finite values at iteration {iteration}")
            }
            Error::Idx { offset, msg } => write!(f, "idx parse error at byte {offset}: {msg}"),
            Error::OracleCap { n, cap } => {
                write!(f, "dense oracle limited to n <= {cap}, got n = {n}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

/// Shorthand for `Error::InvalidInput` with formatting.
macro_rules! input_err {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use input_err;
