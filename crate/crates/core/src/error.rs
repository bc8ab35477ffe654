use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("jet shape mismatch: ({0} vars, order {1}) vs ({2} vars, order {3})")]
    Shape(usize, usize, usize, usize),
    #[error("singular input: {0}")]
    Singular(String),
    #[error("derivative order {requested} exceeds available order {available}")]
    Order { requested: usize, available: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("metric is not positive definite at {0:?}")]
    NotKahler(Vec<f64>),
    #[error("degenerate symplectic form at {0:?}")]
    Degenerate(Vec<f64>),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid holomorphic field `{name}`: residual {residual:.3e} exceeds {threshold:.1e}")]
    InvalidField {
        name: String,
        residual: f64,
        threshold: f64,
    },
    #[error("evaluation produced a non-finite value at node {index} ({point:?})")]
    Evaluation { index: usize, point: Vec<f64> },
    #[error("internal consistency failure: {0}")]
    Consistency(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("rejected deformation amplitude {amplitude}: {reason}")]
    RejectedAmplitude { amplitude: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, GeomError>;
