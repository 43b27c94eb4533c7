use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("node id {id} out of range for graph with {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("training split is empty")]
    EmptyTrainingSplit,

    #[error("target node {target} is already misclassified on the clean graph")]
    TargetMisclassified { target: usize },

    #[error("infeasible modification: {0}")]
    InfeasibleModification(String),

    #[error("insufficient eligible target nodes: {0}")]
    InsufficientTargets(String),

    #[error("label propagation did not converge within {sweeps} sweeps")]
    NonConvergence { sweeps: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
