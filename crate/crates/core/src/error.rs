use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: [usize; 2],
        right: [usize; 2],
    },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss([usize; 2]),
    #[error("tape is not topologically ordered at node {0}")]
    TapeOrder(usize),
    #[error("non-finite value produced by {op} (node {node})")]
    NonFinite { op: &'static str, node: usize },
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(usize),
    #[error("non-finite state at solver step {step}")]
    SolverDiverged { step: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("series too short: need at least {need} points, got {got}")]
    SeriesTooShort { need: usize, got: usize },
    #[error("model has not been fitted")]
    Unfitted,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{path}: line {line}: {msg}")]
    Schema { path: String, line: u64, msg: String },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("training diverged in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("missing prerequisite: {0}")]
    Missing(String),
    #[error("all runs failed")]
    AllRunsFailed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
