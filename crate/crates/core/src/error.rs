use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("matrix is not positive definite: factorization failed at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },

    #[error("matrix is singular to working precision at pivot {pivot}")]
    Singular { pivot: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("graph has {components} connected components; run the analysis per component (see Graph::largest_component)")]
    Disconnected { components: usize },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("mask selects no rows")]
    EmptyMask,

    #[error("class {class} has {available} eligible nodes, {required} required")]
    InsufficientNodes {
        class: usize,
        available: usize,
        required: usize,
    },

    #[error("cache does not match layer parameters: {0}")]
    CacheMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Shape {
        op,
        detail: detail.into(),
    }
}
