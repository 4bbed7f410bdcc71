use thiserror::Error;

/// Errors raised by data handling, estimation and inference.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing observation for ordered pair ({sender}, {receiver})")]
    MissingObservation { sender: String, receiver: String },

    #[error("duplicate observation for ordered pair ({sender}, {receiver}) at line {line}")]
    DuplicateObservation {
        sender: String,
        receiver: String,
        line: usize,
    },

    #[error("self-loop row for node {node} at line {line}; self links are not supported")]
    SelfLoopRejected { node: String, line: usize },

    #[error("line {line}: cannot parse {field} value {value:?}")]
    Parse {
        line: usize,
        field: String,
        value: String,
    },

    #[error("column {0:?} not present in header")]
    MissingColumn(String),

    #[error("invalid network data: {0}")]
    InvalidData(String),

    #[error("only {remaining} nodes remain after removing degenerate nodes (need at least 4)")]
    TooSmallAfterFiltering { remaining: usize },

    #[error("outcome {value} outside the domain of the {family} family")]
    Domain { family: &'static str, value: f64 },

    #[error("block size l={l} does not divide N-1={}", .n - 1)]
    InvalidBlockSize { n: usize, l: usize },

    #[error("index {index} out of range (0..{len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("Newton iterations did not converge after {iterations} iterations (score max-norm {score_norm:e})")]
    NonConvergence { iterations: usize, score_norm: f64 },

    #[error("Hessian is numerically singular in the {block} block (nodes {nodes:?})")]
    SingularHessian { block: &'static str, nodes: Vec<usize> },

    #[error("{what} is not positive definite (eigenvalues {eigenvalues:?})")]
    NotPositiveDefinite {
        what: &'static str,
        eigenvalues: Vec<f64>,
    },

    #[error("pattern with r={r} observations is too large for leave-out averaging with {sets} leave-out sets")]
    PatternTooLargeForLeaveOut { r: usize, sets: usize },

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("{operation} requires a binary outcome family, got {family}")]
    UnsupportedFamily {
        family: &'static str,
        operation: &'static str,
    },

    #[error("half-sample fit ({half}) failed: {source}")]
    DegenerateHalf {
        half: String,
        #[source]
        source: Box<Error>,
    },

    #[error("refusing enumeration: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonConvergence { .. }
            | Error::SingularHessian { .. }
            | Error::NotPositiveDefinite { .. } => true,
            Error::DegenerateHalf { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
