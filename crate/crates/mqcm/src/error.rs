use thiserror::Error;

/// Errors produced by the solver and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An evaluation fell outside the domain where a function is defined,
    /// e.g. a delayed argument below the history's floor.
    #[error("domain error: {0}")]
    Domain(String),

    /// Dense linear algebra failure (SVD did not converge, shape mismatch).
    #[error("linear algebra error: {0}")]
    Linalg(String),

    /// A residual-vector evaluation failed while building one Jacobian column.
    #[error("jacobian column {column}: {source}")]
    JacobianColumn {
        column: usize,
        #[source]
        source: Box<Error>,
    },

    /// An evaluation failed at a specific point, reported with the point.
    #[error("evaluation at x = {x}: {source}")]
    EvalAt {
        x: f64,
        #[source]
        source: Box<Error>,
    },

    /// The adaptive loop grew past its node budget without converging.
    #[error("node budget exceeded: {dof} centers (cap {cap})")]
    DofCap { dof: usize, cap: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at(x: f64, source: Error) -> Self {
        Error::EvalAt {
            x,
            source: Box::new(source),
        }
    }
}
