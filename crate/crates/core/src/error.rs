use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size limit exceeded: {what} would need {needed}, limit is {limit}")]
    SizeLimit {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("field length {got} does not match graph with {expected} vertices")]
    GraphMismatch { expected: usize, got: usize },

    #[error("field is not Dirichlet: vertex {vertex} on the boundary has value {value}")]
    NotDirichlet { vertex: usize, value: f64 },

    #[error("level-0 prefractal has no interior vertices")]
    EmptyInterior,

    #[error(
        "parameter field value {value} at vertex {vertex} lies outside [-M, M] with M = {bound}"
    )]
    DomainViolation {
        vertex: usize,
        value: f64,
        bound: f64,
    },

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("address mismatch: {0}")]
    AddressMismatch(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error(
        "action unbounded below: value {value} fell below floor {floor} at iteration {iteration}"
    )]
    Unbounded {
        value: f64,
        floor: f64,
        iteration: usize,
    },

    #[error("mountain pass path collapsed: maximum at endpoint {endpoint}")]
    PathCollapse { endpoint: usize },

    #[error("schedule rejected at index n = {n}: {reason}")]
    Schedule { n: usize, reason: String },

    #[error("internal numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
