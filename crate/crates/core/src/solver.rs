//! March orchestration: Crank-Nicolson startup, predictor solve against the
//! cached mass factorization, corrector solve against a freshly factorized
//! step matrix, local-error estimation, and step-size adaptation.

use crate::controller::{error_norm, estimate_local_error, next_step, ControllerConfig};
use crate::error::{Error, Result};
use crate::linalg::{FactorSymbolic, LinearSolveHandle};
use crate::model::{transform_to_computational, ModelParams};
use crate::multistep::{
    corrector_coefficients, corrector_system, crank_nicolson_matrix, crank_nicolson_step,
    predictor_coefficients, predictor_rhs, StepRatios,
};
use crate::ode::OdeSystem;
use crate::spatial::{Grid, SemiDiscreteSystem};

/// Linear-algebra work counters for one march.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    /// Factorizations of the mass matrix (one per march).
    pub mass_factorizations: usize,
    /// Factorizations of the Crank-Nicolson startup matrix.
    pub startup_factorizations: usize,
    /// Factorizations of the corrector matrix (one per accepted multistep step).
    pub corrector_factorizations: usize,
    /// Triangular solves against any factorization.
    pub linear_solves: usize,
}

/// Per-step diagnostics of the realized time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Step index n (the step from tau_(n-1) to tau_n).
    pub n: usize,
    /// End of the step.
    pub tau: f64,
    /// Step size k_n.
    pub k: f64,
    /// Adaptation factor, absent for the startup steps.
    pub xi: Option<f64>,
    /// Local-error norm, absent for the startup steps.
    pub eps_norm: Option<f64>,
}

/// Outcome of a march: realized time grid, diagnostics, terminal state.
#[derive(Debug, Clone)]
pub struct RunReport {
    /// tau_0 .. tau_N, with tau_N = T exactly.
    pub time_grid: Vec<f64>,
    /// One record per accepted step (length time_grid.len() - 1).
    pub steps: Vec<StepRecord>,
    /// Terminal solution over the unknowns.
    pub final_state: Vec<f64>,
    pub stats: SolveStats,
}

/// Time-stepping regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteppingMode {
    /// Controller-driven step sizes after the three startup steps.
    Adaptive,
    /// Fixed step so the realized grid has exactly `count` points;
    /// diagnostics are still computed for comparison.
    Equidistant { count: usize },
}

/// March state: the last four solution vectors, recent step sizes and the
/// cached factorizations.
pub struct MarchState {
    pub tau: f64,
    /// Index of the most recent accepted step.
    pub n: usize,
    /// Newest first: U_n, U_(n-1), U_(n-2), U_(n-3).
    history: [Vec<f64>; 4],
    /// Newest first: k_n, k_(n-1), k_(n-2).
    recent_k: [f64; 3],
    /// Step size proposed for the next step.
    pub k_next: f64,
    diagnostics: Vec<StepRecord>,
    mass: LinearSolveHandle,
    symbolic: FactorSymbolic,
    stats: SolveStats,
    t_end: f64,
}

impl MarchState {
    /// Factorizes the mass matrix once and runs the three Crank-Nicolson
    /// startup steps of size `k_startup` from `u0` at tau = 0.
    pub fn initialize<S: OdeSystem>(system: &S, u0: Vec<f64>, k_startup: f64, t_end: f64) -> Result<Self> {
        if !(k_startup > 0.0) {
            return Err(Error::Config(format!("startup step must be positive, got {k_startup}")));
        }
        if 3.0 * k_startup > t_end {
            return Err(Error::Config(format!(
                "three startup steps of {k_startup} exceed the horizon {t_end}"
            )));
        }
        let mut stats = SolveStats::default();
        let symbolic = system.symbolic()?;
        let mass = system.factorize(1.0, 0.0, Some(&symbolic))?;
        stats.mass_factorizations += 1;
        let cn = crank_nicolson_matrix(system, k_startup)?;
        stats.startup_factorizations += 1;

        let mut diagnostics = Vec::new();
        let mut hist: Vec<Vec<f64>> = vec![u0];
        let mut tau = 0.0;
        let mut g_prev = system.source(0.0);
        for step in 1..=3usize {
            let g_next = system.source(tau + k_startup);
            let u = crank_nicolson_step(hist.last().unwrap(), k_startup, system, &g_prev, &g_next, &cn)?;
            stats.linear_solves += 1;
            tau += k_startup;
            diagnostics.push(StepRecord { n: step, tau, k: k_startup, xi: None, eps_norm: None });
            hist.push(u);
            g_prev = g_next;
        }
        let h3 = hist.pop().unwrap();
        let h2 = hist.pop().unwrap();
        let h1 = hist.pop().unwrap();
        let h0 = hist.pop().unwrap();
        Ok(MarchState {
            tau,
            n: 3,
            history: [h3, h2, h1, h0],
            recent_k: [k_startup; 3],
            k_next: k_startup,
            diagnostics,
            mass,
            symbolic,
            stats,
            t_end,
        })
    }

    pub fn current(&self) -> &[f64] {
        &self.history[0]
    }

    pub fn diagnostics(&self) -> &[StepRecord] {
        &self.diagnostics
    }

    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    pub fn finished(&self) -> bool {
        self.t_end - self.tau <= self.t_end * 1e-14
    }

    /// One predictor-corrector step with local-error estimation. The chosen
    /// step is `k_next` truncated to land exactly on the horizon; the
    /// controller output is stored as the next proposal unless `forced_k`
    /// pins the step sequence (equidistant mode, which still logs diagnostics).
    pub fn step<S: OdeSystem>(&mut self, system: &S, cfg: &ControllerConfig, forced_k: Option<f64>) -> Result<()> {
        let step_idx = self.n + 1;
        let remaining = self.t_end - self.tau;
        if remaining <= 0.0 {
            return Err(Error::State("march already reached the horizon".into()));
        }
        let proposal = forced_k.unwrap_or(self.k_next);
        if proposal < cfg.k_min {
            return Err(Error::Adaptivity {
                step: step_idx,
                msg: format!("step proposal {proposal} fell below the floor {}", cfg.k_min),
            });
        }
        let (k, last) = if proposal >= remaining { (remaining, true) } else { (proposal, false) };

        let ratios = StepRatios::from_steps(k, self.recent_k[0], self.recent_k[1], self.recent_k[2])?;
        let pred_coeffs = predictor_coefficients(&ratios)?;
        let cor_coeffs = corrector_coefficients(&ratios)?;
        let history: Vec<&[f64]> = self.history.iter().map(|v| v.as_slice()).collect();

        let g_prev = system.source(self.tau);
        let pred_sys = predictor_rhs(&history, &pred_coeffs, k, system, &g_prev)?;
        let u_pred = pred_sys.solve(&self.mass);
        self.stats.linear_solves += 1;

        let g_next = system.source(self.tau + k);
        let cor_sys = corrector_system(&history, &cor_coeffs, k, system, &g_next)?;
        let cor_matrix = system
            .factorize(cor_sys.alpha0, k, Some(&self.symbolic))
            .map_err(|e| Error::Solver { step: step_idx, msg: e.to_string() })?;
        self.stats.corrector_factorizations += 1;
        let u_cor = cor_matrix.solve(&cor_sys.rhs);
        self.stats.linear_solves += 1;

        let eps = estimate_local_error(&u_cor, &u_pred, k, &cor_coeffs, pred_coeffs.c_loc, system)?;
        let eps_norm = error_norm(&eps, cfg.norm);
        if !eps_norm.is_finite() {
            return Err(Error::Solver { step: step_idx, msg: "non-finite local-error estimate".into() });
        }
        let diag = next_step(eps_norm, k, cfg);

        self.tau = if last { self.t_end } else { self.tau + k };
        self.n = step_idx;
        self.history.rotate_right(1);
        self.history[0] = u_cor;
        self.recent_k.rotate_right(1);
        self.recent_k[0] = k;
        if forced_k.is_none() {
            self.k_next = diag.k_next;
        }
        self.diagnostics.push(StepRecord {
            n: step_idx,
            tau: self.tau,
            k,
            xi: Some(diag.xi),
            eps_norm: Some(eps_norm),
        });
        Ok(())
    }
}

/// One controller-driven step; startup (n >= 3 with four history vectors)
/// must be complete.
pub fn adaptive_step<S: OdeSystem>(state: &mut MarchState, system: &S, cfg: &ControllerConfig) -> Result<()> {
    state.step(system, cfg, None)
}

/// Marches a generic semi-discrete system from `u0` at tau = 0 to `t_end`.
pub fn march_system<S: OdeSystem>(
    system: &S,
    u0: &[f64],
    cfg: &ControllerConfig,
    t_end: f64,
    startup_k: f64,
    mode: SteppingMode,
) -> Result<RunReport> {
    if u0.len() != system.dim() {
        return Err(Error::State(format!(
            "initial vector length {} does not match system dimension {}",
            u0.len(),
            system.dim()
        )));
    }
    let (k_startup, forced) = match mode {
        SteppingMode::Adaptive => (startup_k, None),
        SteppingMode::Equidistant { count } => {
            if count < 5 {
                return Err(Error::Config(format!("equidistant grid needs at least 5 points, got {count}")));
            }
            let k = t_end / (count as f64 - 1.0);
            (k, Some(k))
        }
    };
    let mut state = MarchState::initialize(system, u0.to_vec(), k_startup, t_end)?;
    while !state.finished() {
        state.step(system, cfg, forced)?;
    }
    let mut time_grid = Vec::with_capacity(state.diagnostics.len() + 1);
    time_grid.push(0.0);
    time_grid.extend(state.diagnostics.iter().map(|s| s.tau));
    Ok(RunReport {
        time_grid,
        steps: state.diagnostics.clone(),
        final_state: state.history[0].clone(),
        stats: state.stats,
    })
}

/// Marches the assembled pricing system to maturity. Startup steps use the
/// parabolic mesh ratio k = 0.05 h^2 in adaptive mode.
pub fn march(
    system: &SemiDiscreteSystem,
    u0: &[f64],
    cfg: &ControllerConfig,
    grid: &Grid,
    p: &ModelParams,
    mode: SteppingMode,
) -> Result<RunReport> {
    let startup_k = 0.05 * grid.h * grid.h;
    march_system(system, u0, cfg, p.maturity, startup_k, mode)
}

fn lagrange4(values: &[f64; 4], t: f64, nodes: &[f64; 4]) -> f64 {
    let mut acc = 0.0;
    for m in 0..4 {
        let mut w = values[m];
        for l in 0..4 {
            if l != m {
                w *= (t - nodes[l]) / (nodes[m] - nodes[l]);
            }
        }
        acc += w;
    }
    acc
}

/// Interpolates the terminal surface at (S0, v0) and undoes the value
/// transformation: V = K e^(-r T) u(x0, y0), with u read from the unknown
/// vector by fourth-order tensor-product Lagrange interpolation.
pub fn extract_price(u: &[f64], grid: &Grid, p: &ModelParams, s0: f64, v0: f64) -> Result<f64> {
    let (x0, y0) = transform_to_computational(s0, v0, p)?;
    let tol = 1e-12 * (1.0 + grid.h);
    if x0 < grid.x_min - tol || x0 > grid.x_max + tol || y0 < grid.y_min - tol || y0 > grid.y_max + tol {
        return Err(Error::Domain(format!(
            "(S0, v0) = ({s0}, {v0}) maps to ({x0}, {y0}) outside the computational domain"
        )));
    }
    if grid.n_x < 6 || grid.n_y < 4 {
        return Err(Error::Domain("grid too small for fourth-order interpolation".into()));
    }
    // 4x4 neighbourhood within the unknown columns 1..n_x-2
    let fi = ((x0 - grid.x_min) / grid.h).floor() as i64;
    let i0 = (fi - 1).clamp(1, grid.n_x as i64 - 5) as usize;
    let fj = ((y0 - grid.y_min) / grid.h).floor() as i64;
    let j0 = (fj - 1).clamp(0, grid.n_y as i64 - 4) as usize;

    let xn = [grid.x(i0), grid.x(i0 + 1), grid.x(i0 + 2), grid.x(i0 + 3)];
    let yn = [grid.y(j0), grid.y(j0 + 1), grid.y(j0 + 2), grid.y(j0 + 3)];
    let mut col = [0.0; 4];
    for (jj, c) in col.iter_mut().enumerate() {
        let row = [
            u[grid.index(i0, j0 + jj)],
            u[grid.index(i0 + 1, j0 + jj)],
            u[grid.index(i0 + 2, j0 + jj)],
            u[grid.index(i0 + 3, j0 + jj)],
        ];
        *c = lagrange4(&row, x0, &xn);
    }
    let u_val = lagrange4(&col, y0, &yn);
    Ok(p.strike * (-p.r * p.maturity).exp() * u_val)
}
