//! Variable-step four-step schemes: the explicit predictor, the implicit
//! BDF-4 corrector, their local-error constants, and the Crank-Nicolson
//! startup step.
//!
//! With step ratios iota1 = k_n/k_(n-1), iota2 = k_n/k_(n-2),
//! iota3 = k_n/k_(n-3), both schemes take the form
//!
//! ```text
//! sum_j alpha_j U_(n-j) = k_n * M^-1 (g - K U) evaluated at tau_(n-1)  (predictor)
//! sum_j alpha_j U_(n-j) = k_n * M^-1 (g - K U) evaluated at tau_n      (corrector)
//! ```
//!
//! so the weights satisfy sum_j alpha_j p(tau_(n-j)) = k_n p'(tau*) for all
//! polynomials p of degree <= 4, with tau* = tau_(n-1) resp. tau_n. The
//! one-step errors are C_P k^5 u^(5) and C_C k^5 u^(5). The weights and
//! error constants are evaluated from closed-form rational expressions in the
//! ratios; the order conditions serve as the independent test oracle.

use crate::error::{Error, Result};
use crate::linalg::LinearSolveHandle;
use crate::ode::OdeSystem;

/// Ratios of the current step to the three preceding steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRatios {
    pub iota1: f64,
    pub iota2: f64,
    pub iota3: f64,
}

impl StepRatios {
    pub fn new(iota1: f64, iota2: f64, iota3: f64) -> Result<Self> {
        for (name, v) in [("iota1", iota1), ("iota2", iota2), ("iota3", iota3)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("step ratio {name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { iota1, iota2, iota3 })
    }

    /// Ratios of k_n against the three previous step sizes.
    pub fn from_steps(k_n: f64, k_nm1: f64, k_nm2: f64, k_nm3: f64) -> Result<Self> {
        Self::new(k_n / k_nm1, k_n / k_nm2, k_n / k_nm3)
    }

    pub fn equidistant() -> Self {
        Self { iota1: 1.0, iota2: 1.0, iota3: 1.0 }
    }
}

/// Which scheme a coefficient set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Predictor,
    Corrector,
}

/// Scheme weights alpha_0..alpha_4 with the leading local-error constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultistepCoeffs {
    pub alpha: [f64; 5],
    pub c_loc: f64,
    pub kind: SchemeKind,
}

fn positive_denominator(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("denominator {name} = {v} is not strictly positive")))
    }
}

/// Weights and error constant of the explicit four-step predictor.
pub fn predictor_coefficients(r: &StepRatios) -> Result<MultistepCoeffs> {
    let (i1, i2, i3) = (r.iota1, r.iota2, r.iota3);
    StepRatios::new(i1, i2, i3)?;
    let i1_2 = i1 * i1;
    let i1_3 = i1_2 * i1;
    let i2_2 = i2 * i2;

    let num0 = 2.0 * i1 * i2 * i3 + i3 * i1_2 + i2 * i1_2 + i2_2 * i3 + i1 * i2_2;
    let phi0 = positive_denominator(
        "phi0",
        i1_3 * i3 * i2_2
            + 3.0 * i2_2 * i3 * i1
            + 4.0 * i1_2 * i3 * i2
            + 2.0 * i1_3 * i3 * i2
            + 3.0 * i1_2 * i2_2 * i3
            + i2_2 * i1_3
            + 2.0 * i1_2 * i2_2
            + i2_2 * i3
            + 2.0 * i1 * i2 * i3
            + i1 * i2_2
            + i3 * i1_2
            + i1_3 * i3
            + i1_3 * i2
            + i2 * i1_2,
    )?;
    let a0 = num0 / phi0;
    let a1 = (i1_3 * i2 - 2.0 * i1 * i2 * i3 - i3 * i1_2 - i2 * i1_2 - i2_2 * i3 - i1 * i2_2
        + 3.0 * i2_2 * i3 * i1
        + 4.0 * i1_2 * i3 * i2
        + 2.0 * i1_2 * i2_2
        + i1_3 * i3)
        / positive_denominator("alpha1 denominator", num0)?;
    let a2 = -num0 / positive_denominator("alpha2 denominator", (i2 + i3) * (i1 + 1.0))?;
    let a3 = i2_2 * (i1 * i2 + i1 * i3 + i2 * i3)
        / positive_denominator("alpha3 denominator", (i1 * i2 + i2 + i1) * (i2 + i1))?;
    let a4 = -(i2 + i1) * i2_2 * i3.powi(4)
        / positive_denominator(
            "alpha4 denominator",
            (i1 * i2 * i3 + i2 * i3 + i1 * i3 + i1 * i2) * (i1 * i2 + i1 * i3 + i2 * i3) * (i2 + i3),
        )?;
    let c_loc = (i1 + 1.0) * (i1 * i2 + i2 + i1) * (i1 * i2 * i3 + i2 * i3 + i1 * i3 + i1 * i2)
        / positive_denominator("C_P denominator", 120.0 * i1_3 * i3 * i2_2)?;
    Ok(MultistepCoeffs { alpha: [a0, a1, a2, a3, a4], c_loc, kind: SchemeKind::Predictor })
}

/// Weights and error constant of the implicit variable-step BDF-4 corrector.
pub fn corrector_coefficients(r: &StepRatios) -> Result<MultistepCoeffs> {
    let (i1, i2, i3) = (r.iota1, r.iota2, r.iota3);
    StepRatios::new(i1, i2, i3)?;
    let i1_2 = i1 * i1;
    let i1_3 = i1_2 * i1;
    let i2_2 = i2 * i2;
    let i2_3 = i2_2 * i2;
    let i3_2 = i3 * i3;
    let i3_3 = i3_2 * i3;

    let den0 = positive_denominator(
        "alpha0 denominator",
        (i1 * i2 * i3 + i2 * i3 + i1 * i3 + i1 * i2) * (i1 * i2 + i2 + i1) * (i1 + 1.0),
    )?;
    let a0 = (3.0 * i2_2 * i1_3
        + 4.0 * i1_3 * i3 * i2_2
        + 6.0 * i1_3 * i3 * i2
        + 2.0 * i1_3 * i2
        + 2.0 * i1_3 * i3
        + 9.0 * i1_2 * i2_2 * i3
        + 4.0 * i1_2 * i2_2
        + i2 * i1_2)
        / den0
        + (8.0 * i1_2 * i3 * i2 + i3 * i1_2 + 6.0 * i2_2 * i3 * i1 + i1 * i2_2 + 2.0 * i1 * i2 * i3 + i2_2 * i3)
            / den0;

    let den1 = positive_denominator("alpha1 denominator", (i1 * i2 + i1 * i3 + i2 * i3) * (i2 + i1))?;
    let a1 = -((3.0 * i2_2 * i3 * i1
        + 4.0 * i1_2 * i3 * i2
        + 2.0 * i1_3 * i3 * i2
        + 3.0 * i1_2 * i2_2 * i3
        + i1_3 * i3 * i2_2
        + i2_2 * i1_3
        + 2.0 * i1_2 * i2_2
        + i2_2 * i3)
        / den1)
        - (2.0 * i1 * i2 * i3 + i1 * i2_2 + i3 * i1_2 + i1_3 * i3 + i1_3 * i2 + i2 * i1_2) / den1;

    let a2 = (i1_2 * i2_2
        + i1_2 * i2_2 * i3
        + 2.0 * i1_2 * i3 * i2
        + i2 * i1_2
        + i3 * i1_2
        + 2.0 * i2_2 * i3 * i1
        + i1 * i2_2
        + 2.0 * i1 * i2 * i3
        + i2_2 * i3)
        / positive_denominator("alpha2 denominator", (i1 + 1.0) * (i2 + i3))?;

    let a3 = -((i2 * i3 + i1 * i3 + i3 * i1_2 + 2.0 * i1 * i2 * i3 + i1_2 * i3 * i2 + i2 * i1_2 + i1 * i2) * i2_2)
        / positive_denominator("alpha3 denominator", i2 * i1_2 + i1 * i2_2 + 2.0 * i1 * i2 + i2_2 + i1_2)?;

    let phi4 = positive_denominator(
        "phi4",
        i3_3 * i1_2
            + 2.0 * i1 * i3_3 * i2
            + 4.0 * i1 * i2_2 * i3_2
            + i2_2 * i3_3
            + 2.0 * i1_2 * i2_2 * i3_2
            + i2_2 * i3_3 * i1
            + i2_3 * i3_2
            + i1_2 * i2_3
            + i2 * i3_3 * i1_2
            + i2_3 * i3_2 * i1
            + 3.0 * i1_2 * i2 * i3_2
            + 3.0 * i1_2 * i2_2 * i3
            + i2_3 * i3 * i1_2
            + 2.0 * i1 * i2_3 * i3,
    )?;
    let a4 = (i2 + i1 + i1_2 + 2.0 * i1 * i2 + i2 * i1_2) * i2_2 * i3.powi(4) / phi4;

    let n_loc = positive_denominator(
        "N_C",
        120.0
            * i1_3
            * i2_2
            * i3
            * (4.0 * i1_3 * i3 * i2_2
                + 6.0 * i3 * i1_3 * i2
                + 2.0 * i3 * i1_3
                + 3.0 * i2_2 * i1_3
                + 2.0 * i2 * i1_3
                + 8.0 * i1_2 * i3 * i2
                + 9.0 * i1_2 * i2_2 * i3
                + i1_2 * i3
                + 4.0 * i1_2 * i2_2
                + i2 * i1_2
                + 6.0 * i2_2 * i3 * i1
                + 2.0 * i1 * i2 * i3
                + i1 * i2_2
                + i3 * i2_2),
    )?;
    let c_loc = -((i1 * i2 * i3 + i2 * i3 + i1 * i3 + i1 * i2).powi(2)
        * (i1 + 1.0).powi(2)
        * (i1 * i2 + i2 + i1).powi(2))
        / n_loc;

    Ok(MultistepCoeffs { alpha: [a0, a1, a2, a3, a4], c_loc, kind: SchemeKind::Corrector })
}

/// The predictor step as a mass-matrix system: alpha_0 M U_n = rhs.
pub struct PredictorSystem {
    pub alpha0: f64,
    pub rhs: Vec<f64>,
}

impl PredictorSystem {
    /// Solves for the predicted value using a factorization of M.
    pub fn solve(&self, mass: &LinearSolveHandle) -> Vec<f64> {
        let mut x = mass.solve(&self.rhs);
        for v in &mut x {
            *v /= self.alpha0;
        }
        x
    }
}

/// Builds the predictor system
/// `alpha_0 M U_n = k_n g_(n-1) - [alpha_1 M + k_n K] U_(n-1) - M sum_(j>=2) alpha_j U_(n-j)`.
///
/// `history` holds U_(n-1), U_(n-2), U_(n-3), U_(n-4) in that order.
pub fn predictor_rhs<S: OdeSystem>(
    history: &[&[f64]],
    coeffs: &MultistepCoeffs,
    k_n: f64,
    system: &S,
    g_nm1: &[f64],
) -> Result<PredictorSystem> {
    if coeffs.kind != SchemeKind::Predictor {
        return Err(Error::State("predictor_rhs requires predictor coefficients".into()));
    }
    if history.len() < 4 {
        return Err(Error::State(format!("predictor needs 4 history vectors, got {}", history.len())));
    }
    let dim = system.dim();
    let mut combo = vec![0.0; dim];
    for (j, u) in history.iter().take(4).enumerate() {
        let alpha = coeffs.alpha[j + 1];
        for i in 0..dim {
            combo[i] += alpha * u[i];
        }
    }
    let mut rhs = vec![0.0; dim];
    system.mass_mul(&combo, &mut rhs);
    let mut ku = vec![0.0; dim];
    system.stiffness_mul(history[0], &mut ku);
    for i in 0..dim {
        rhs[i] = k_n * g_nm1[i] - k_n * ku[i] - rhs[i];
    }
    Ok(PredictorSystem { alpha0: coeffs.alpha[0], rhs })
}

/// The corrector step as a linear system `(alpha_0 M + k_n K) U_n = rhs`.
pub struct CorrectorSystem {
    pub alpha0: f64,
    pub k_n: f64,
    pub rhs: Vec<f64>,
}

/// Builds the corrector system
/// `[alpha_0 M + k_n K] U_n = -M sum_(j>=1) alpha_j U_(n-j) + k_n g_n`.
pub fn corrector_system<S: OdeSystem>(
    history: &[&[f64]],
    coeffs: &MultistepCoeffs,
    k_n: f64,
    system: &S,
    g_n: &[f64],
) -> Result<CorrectorSystem> {
    if coeffs.kind != SchemeKind::Corrector {
        return Err(Error::State("corrector_system requires corrector coefficients".into()));
    }
    if history.len() < 4 {
        return Err(Error::State(format!("corrector needs 4 history vectors, got {}", history.len())));
    }
    let dim = system.dim();
    let mut combo = vec![0.0; dim];
    for (j, u) in history.iter().take(4).enumerate() {
        let alpha = coeffs.alpha[j + 1];
        for i in 0..dim {
            combo[i] += alpha * u[i];
        }
    }
    let mut rhs = vec![0.0; dim];
    system.mass_mul(&combo, &mut rhs);
    for i in 0..dim {
        rhs[i] = k_n * g_n[i] - rhs[i];
    }
    Ok(CorrectorSystem { alpha0: coeffs.alpha[0], k_n, rhs })
}

/// One Crank-Nicolson step: solves
/// `(M + k/2 K) U_n = (M - k/2 K) U_(n-1) + (k/2)(g_n + g_(n-1))`.
pub fn crank_nicolson_step<S: OdeSystem>(
    u_prev: &[f64],
    k: f64,
    system: &S,
    g_prev: &[f64],
    g_next: &[f64],
    factorization: &LinearSolveHandle,
) -> Result<Vec<f64>> {
    if k <= 0.0 {
        return Err(Error::Domain(format!("Crank-Nicolson step size must be positive, got {k}")));
    }
    let dim = system.dim();
    let mut rhs = vec![0.0; dim];
    system.mass_mul(u_prev, &mut rhs);
    let mut ku = vec![0.0; dim];
    system.stiffness_mul(u_prev, &mut ku);
    for i in 0..dim {
        rhs[i] += -0.5 * k * ku[i] + 0.5 * k * (g_next[i] + g_prev[i]);
    }
    let mut u = rhs;
    factorization.solve_in_place(&mut u);
    Ok(u)
}

/// Factorization for the Crank-Nicolson left side `M + (k/2) K`.
pub fn crank_nicolson_matrix<S: OdeSystem>(system: &S, k: f64) -> Result<LinearSolveHandle> {
    system.factorize(1.0, 0.5 * k, None)
}
