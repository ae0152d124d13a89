//! Abstraction over the semi-discrete system `M du/dtau = g(tau) - K u`
//! consumed by the time integrators. The PDE assembly implements it; tests
//! drive the integrators with small dense or diagonal systems.

use crate::error::Result;
use crate::linalg::{FactorSymbolic, LinearSolveHandle};

pub trait OdeSystem {
    fn dim(&self) -> usize;

    /// out = M x
    fn mass_mul(&self, x: &[f64], out: &mut [f64]);

    /// out = K x
    fn stiffness_mul(&self, x: &[f64], out: &mut [f64]);

    /// g(tau)
    fn source(&self, tau: f64) -> Vec<f64>;

    /// Symbolic analysis of the shared sparsity pattern, reusable across
    /// factorizations of alpha*M + beta*K.
    fn symbolic(&self) -> Result<FactorSymbolic>;

    /// Factorizes alpha*M + beta*K.
    fn factorize(&self, alpha_mass: f64, beta_stiff: f64, symbolic: Option<&FactorSymbolic>) -> Result<LinearSolveHandle>;
}

/// Diagonal test system: M = diag(mass), K = diag(stiff), g = 0.
pub struct DiagonalSystem {
    pub mass: Vec<f64>,
    pub stiff: Vec<f64>,
}

impl DiagonalSystem {
    pub fn new(mass: Vec<f64>, stiff: Vec<f64>) -> Self {
        assert_eq!(mass.len(), stiff.len());
        Self { mass, stiff }
    }
}

impl OdeSystem for DiagonalSystem {
    fn dim(&self) -> usize {
        self.mass.len()
    }

    fn mass_mul(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = self.mass[i] * x[i];
        }
    }

    fn stiffness_mul(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = self.stiff[i] * x[i];
        }
    }

    fn source(&self, _tau: f64) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    fn symbolic(&self) -> Result<FactorSymbolic> {
        self.as_pair().symbolic()
    }

    fn factorize(&self, alpha_mass: f64, beta_stiff: f64, symbolic: Option<&FactorSymbolic>) -> Result<LinearSolveHandle> {
        self.as_pair().factorize_combo(alpha_mass, beta_stiff, symbolic)
    }
}

impl DiagonalSystem {
    fn as_pair(&self) -> crate::linalg::MatrixPair {
        let trip: Vec<(usize, usize, f64, f64)> =
            (0..self.dim()).map(|i| (i, i, self.stiff[i], self.mass[i])).collect();
        crate::linalg::MatrixPair::from_triplets(self.dim(), &trip)
    }
}
