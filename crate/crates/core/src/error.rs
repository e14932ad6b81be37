use thiserror::Error;

/// Errors raised while building or validating a problem instance.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("node {node} out of range (n_nodes = {n_nodes})")]
    NodeOutOfRange { node: usize, n_nodes: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cost entry {value} at {location} is not finite; use the forbidden mask instead")]
    NonFinite { location: String, value: f64 },
}

/// Errors raised by the tensor primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("dimension mismatch on `{a}`/`{b}`: {da} vs {db}")]
    DimMismatch {
        a: String,
        b: String,
        da: usize,
        db: usize,
    },
    #[error("data length {got} does not match shape product {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("coordinate out of range or duplicated: {0:?}")]
    BadCoordinate(Vec<usize>),
    #[error("no surviving state: all amplitudes are zero")]
    NoSurvivingState,
    #[error("expected a rank-1 tensor, got rank {0}")]
    NotAVector(usize),
}

/// Errors raised by the solver pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("no surviving state at iteration {iteration} (infeasible instance or amplitude underflow)")]
    NoSurvivingState { iteration: usize },
    #[error("amplitude underflow at iteration {iteration}: tau = {tau} pushes e^(-tau*cost) below f64 range")]
    Underflow { iteration: usize, tau: f64 },
    #[error("layer construction failed: {0}")]
    Layer(String),
    #[error("oracle refused: {0}")]
    OracleGuard(String),
    #[error("instance is infeasible")]
    Infeasible,
}

pub type Result<T, E = SolveError> = std::result::Result<T, E>;
