use std::io;

/// Errors produced anywhere in the solver stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("cell {cell} is degenerate (volume {volume:e})")]
    DegenerateCell { cell: usize, volume: f64 },

    #[error("function is not finite at vertex {vertex}")]
    NonFinite { vertex: usize },

    #[error("nodal vector at vertex {vertex} has norm {norm:e}, below the guard {guard:e}")]
    NearZeroNorm { vertex: usize, norm: f64, guard: f64 },

    #[error("field is not nodally unit at vertex {vertex}: |u| = {norm}")]
    NotUnit { vertex: usize, norm: f64 },

    #[error("constraint row for node {node} is zero; direction field is degenerate")]
    RankDeficient { node: usize },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("{method} did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("fixed point did not converge in {iterations} iterations (last relative increment {increment:e})")]
    FixedPoint { iterations: usize, increment: f64 },

    #[error("mesh has no interior vertices")]
    NoInteriorVertices,

    #[error("singular point at {0:?}")]
    Singular(Vec<f64>),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
