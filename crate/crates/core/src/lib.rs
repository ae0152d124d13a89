//! Pricing engine for European options under a six-member family of
//! stochastic volatility models.
//!
//! The engine transforms the pricing PDE to a constant-domain equation with
//! equal second-derivative coefficients, discretises it in space with a
//! fourth-order compact nine-point scheme on a uniform square mesh, and
//! marches the resulting semi-discrete system `M dU/dtau = g(tau) - K U` with
//! a variable-step fourth-order predictor-corrector pair: an explicit
//! four-step scheme reusing a single factorization of M, an implicit
//! variable-step BDF-4 corrector, and a step controller driven by the
//! predictor-corrector discrepancy.

pub mod controller;
pub mod error;
pub mod linalg;
pub mod model;
pub mod multistep;
pub mod ode;
pub mod solver;
pub mod spatial;

pub use controller::{ControllerConfig, ErrorNorm, StepDiagnostics};
pub use error::{Error, Result};
pub use model::{ModelParams, PdeCoefficients, TransformedCoeffs};
pub use multistep::{MultistepCoeffs, SchemeKind, StepRatios};
pub use ode::OdeSystem;
pub use solver::{extract_price, march, MarchState, RunReport, SolveStats, StepRecord, SteppingMode};
pub use spatial::{assemble, build_grid, initial_vector, BoundarySpec, Grid, SemiDiscreteSystem};
