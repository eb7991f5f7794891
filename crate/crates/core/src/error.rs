use thiserror::Error;

/// Errors surfaced by the mesh, assembly and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("linear solve failed: {0}")]
    SolverFailure(String),

    #[error("degenerate director at node {node}: |n| = {norm:e}")]
    DegenerateNode { node: usize, norm: f64 },

    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    #[error("report i/o: {0}")]
    Report(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
