use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("inverted or degenerate element {element} (det J = {det:e})")]
    InvertedElement { element: usize, det: f64 },

    #[error("point {point:?} lies outside the reference element")]
    OutsideReference { point: Vec<f64> },

    #[error("unsupported quadrature degree {degree} for {kind}")]
    QuadratureDegree { kind: &'static str, degree: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("Newton iteration did not converge after {iterations} iterations, residual history {history:?}")]
    NotConverged { iterations: usize, history: Vec<f64> },

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
