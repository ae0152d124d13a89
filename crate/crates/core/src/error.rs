use thiserror::Error;

/// Errors produced by the pricing engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid model or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Coefficient evaluation or stencil construction failed at a grid node.
    #[error("assembly error at node (i={i}, j={j}): {msg}")]
    Assembly { i: usize, j: usize, msg: String },

    /// The march was driven with inconsistent or missing state.
    #[error("state error: {0}")]
    State(String),

    /// A linear solve or factorization broke down.
    #[error("solver error at step {step}: {msg}")]
    Solver { step: usize, msg: String },

    /// Step-size adaptation left the admissible range.
    #[error("adaptivity error at step {step}: {msg}")]
    Adaptivity { step: usize, msg: String },

    /// |C_C - C_P| is too small for the error estimate to be meaningful.
    #[error("degenerate error constants: |C_C - C_P| = {0:e}")]
    DegenerateConstants(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
