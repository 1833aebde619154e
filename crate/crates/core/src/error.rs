use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("n*d = {0} is odd, no perfect matching of half-edges exists")]
    OddHalfEdges(usize),

    #[error("degree {0} is below 3")]
    DegreeTooSmall(usize),

    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("no simple graph after {attempts} attempts (observed rejection rate {rejection_rate:.4})")]
    AttemptsExhausted { attempts: usize, rejection_rate: f64 },

    /// A request exceeds a hard state-space or work cap.
    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    /// The operation is not defined in the requested parameter regime.
    #[error("not available in this regime: {0}")]
    Regime(String),

    #[error("malformed graph extension: {0}")]
    MalformedExtension(String),

    #[error("parse error: {0}")]
    Parse(String),
}
