//! Uniform grid construction and the fourth-order compact semi-discrete
//! system `M_h dU/dtau = g(tau) - K_h U`.
//!
//! Dirichlet data is imposed at x_min and x_max; those columns are eliminated
//! from the unknown vector and their influence enters through the
//! time-dependent source `g`. No condition is imposed at y_min/y_max: the
//! interior stencil is applied there and the ghost nodes one row outside are
//! filled by quartic one-sided extrapolation, which is folded into the matrix
//! rows. Unknowns are ordered lexicographically, x fastest.

mod smoothing;
mod stencil;

pub use smoothing::{smooth_initial, KERNEL as SMOOTHING_KERNEL};
pub use stencil::{hoc_row_stencil, CoeffSample, NodeStencil};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{CsMat, FactorSymbolic, LinearSolveHandle, MatrixPair};
use crate::model::{initial_condition, transform_to_computational, ModelParams, TransformedCoeffs};
use crate::ode::OdeSystem;

/// Quartic extrapolation weights: value one step outside the range expressed
/// through the five nearest in-range nodes. Exact for polynomials of degree <= 4.
pub const GHOST_WEIGHTS: [f64; 5] = [5.0, -10.0, 10.0, -5.0, 1.0];

/// Uniform square-mesh grid in the computational domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    /// First y node.
    pub y_min: f64,
    /// Last y node, `y_min + (n_y - 1) h`; covers the transformed v-range.
    pub y_max: f64,
    /// Node count in x (including the two Dirichlet columns).
    pub n_x: usize,
    /// Node count in y.
    pub n_y: usize,
    /// Mesh width, identical in both directions.
    pub h: f64,
}

impl Grid {
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + self.h * i as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + self.h * j as f64
    }

    /// Number of unknowns: interior-in-x columns times all y rows.
    pub fn unknowns(&self) -> usize {
        (self.n_x - 2) * self.n_y
    }

    /// Index of unknown (i, j), i in 1..n_x-1, lexicographic with x fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && i + 1 < self.n_x);
        (i - 1) + j * (self.n_x - 2)
    }
}

/// Builds the computational grid from physical (S, v) ranges.
pub fn build_grid(p: &ModelParams, s_range: (f64, f64), v_range: (f64, f64), n: usize) -> Result<Grid> {
    let (s_lo, s_hi) = s_range;
    let (v_lo, v_hi) = v_range;
    if !(0.0 < s_lo && s_lo < s_hi) || !(0.0 < v_lo && v_lo < v_hi) {
        return Err(Error::Config(format!(
            "degenerate physical ranges: S in ({s_lo}, {s_hi}), v in ({v_lo}, {v_hi})"
        )));
    }
    if n < 5 {
        return Err(Error::Config(format!("x-direction needs at least 5 nodes, got {n}")));
    }
    let (x_min, y_min) = transform_to_computational(s_lo, v_lo, p)?;
    let (x_max, y_hi) = transform_to_computational(s_hi, v_hi, p)?;
    let h = (x_max - x_min) / (n as f64 - 1.0);
    let n_y = ((y_hi - y_min) / h - 1e-12).ceil() as usize + 1;
    if n_y < 5 {
        return Err(Error::Config(format!(
            "y-direction resolves only {n_y} nodes; ghost extrapolation needs at least 5"
        )));
    }
    Ok(Grid {
        x_min,
        x_max,
        y_min,
        y_max: y_min + h * (n_y as f64 - 1.0),
        n_x: n,
        n_y,
        h,
    })
}

/// Dirichlet data on one x-boundary: tau -> (value, d value / d tau).
pub type BoundaryFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Dirichlet data for the two x-boundaries.
#[derive(Clone)]
pub struct BoundarySpec {
    lo: BoundaryFn,
    hi: BoundaryFn,
}

impl BoundarySpec {
    pub fn new(lo: BoundaryFn, hi: BoundaryFn) -> Self {
        Self { lo, hi }
    }

    /// Homogeneous data on both sides.
    pub fn zero() -> Self {
        Self { lo: Arc::new(|_| (0.0, 0.0)), hi: Arc::new(|_| (0.0, 0.0)) }
    }

    /// European-put asymptotics in transformed variables: the deep
    /// in-the-money bound K e^(-r tau) - S becomes u = 1 - e^(r tau) S/K at
    /// x_min, and u = 0 at x_max. Reduces to the initial condition at tau = 0.
    pub fn european_put(p: &ModelParams, grid: &Grid) -> Self {
        let e_lo = (grid.x_min / p.x_scale()).exp();
        let r = p.r;
        Self {
            lo: Arc::new(move |tau: f64| {
                let gr = (r * tau).exp();
                (1.0 - gr * e_lo, -r * gr * e_lo)
            }),
            hi: Arc::new(|_| (0.0, 0.0)),
        }
    }

    pub fn lo(&self, tau: f64) -> (f64, f64) {
        (self.lo)(tau)
    }

    pub fn hi(&self, tau: f64) -> (f64, f64) {
        (self.hi)(tau)
    }
}

impl std::fmt::Debug for BoundarySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundarySpec").finish_non_exhaustive()
    }
}

/// The assembled semi-discrete system.
pub struct SemiDiscreteSystem {
    grid: Grid,
    pair: MatrixPair,
    /// Couplings of each unknown row to the eliminated boundary columns,
    /// per unit boundary value: stiffness and mass, low side and high side.
    g_k_lo: Vec<f64>,
    g_m_lo: Vec<f64>,
    g_k_hi: Vec<f64>,
    g_m_hi: Vec<f64>,
    bc: BoundarySpec,
}

/// Assembles mass and stiffness matrices plus the boundary-source generator.
pub fn assemble(grid: &Grid, coeffs: &TransformedCoeffs, bc: BoundarySpec) -> Result<SemiDiscreteSystem> {
    let (n, m) = (grid.n_x, grid.n_y);
    let dim = grid.unknowns();
    let mut trip: Vec<(usize, usize, f64, f64)> = Vec::with_capacity(dim * 9);
    let mut g_k_lo = vec![0.0; dim];
    let mut g_m_lo = vec![0.0; dim];
    let mut g_k_hi = vec![0.0; dim];
    let mut g_m_hi = vec![0.0; dim];

    for j in 0..m {
        let y = grid.y(j);
        coeffs.check_node(y).map_err(|e| Error::Assembly { i: 0, j, msg: e.to_string() })?;
        let sample = CoeffSample::at(coeffs, y);
        if sample.a == 0.0 || !sample.a.is_finite() {
            return Err(Error::Assembly { i: 0, j, msg: format!("diffusion coefficient a(y) = {} at y = {y}", sample.a) });
        }
        let st = hoc_row_stencil(grid.h, &sample);
        for w in st.mass.iter().chain(st.stiffness.iter()).flatten() {
            if !w.is_finite() {
                return Err(Error::Assembly { i: 0, j, msg: format!("non-finite stencil weight at y = {y}") });
            }
        }
        for i in 1..n - 1 {
            let row = grid.index(i, j);
            for dy in -1i64..=1 {
                let jj = j as i64 + dy;
                for dx in -1i64..=1 {
                    let ii = (i as i64 + dx) as usize;
                    let kw = st.stiffness[(dy + 1) as usize][(dx + 1) as usize];
                    let mw = st.mass[(dy + 1) as usize][(dx + 1) as usize];
                    if kw == 0.0 && mw == 0.0 {
                        continue;
                    }
                    // ghost rows fold onto the five nearest in-range rows
                    let mut fold = [(0usize, 0.0f64); 5];
                    let targets: &[(usize, f64)] = if jj < 0 {
                        for (t, slot) in fold.iter_mut().enumerate() {
                            *slot = (t, GHOST_WEIGHTS[t]);
                        }
                        &fold
                    } else if jj as usize > m - 1 {
                        for (t, slot) in fold.iter_mut().enumerate() {
                            *slot = (m - 1 - t, GHOST_WEIGHTS[t]);
                        }
                        &fold
                    } else {
                        fold[0] = (jj as usize, 1.0);
                        &fold[..1]
                    };
                    for &(jt, wgt) in targets {
                        if ii == 0 {
                            g_k_lo[row] += kw * wgt;
                            g_m_lo[row] += mw * wgt;
                        } else if ii == n - 1 {
                            g_k_hi[row] += kw * wgt;
                            g_m_hi[row] += mw * wgt;
                        } else {
                            trip.push((row, grid.index(ii, jt), kw * wgt, mw * wgt));
                        }
                    }
                }
            }
        }
    }
    let pair = MatrixPair::from_triplets(dim, &trip);
    Ok(SemiDiscreteSystem { grid: *grid, pair, g_k_lo, g_m_lo, g_k_hi, g_m_hi, bc })
}

impl SemiDiscreteSystem {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mass(&self) -> &CsMat {
        self.pair.mass()
    }

    pub fn stiffness(&self) -> &CsMat {
        self.pair.stiffness()
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.bc
    }

    /// Source vector g(tau): the eliminated Dirichlet columns act on the
    /// unknowns through both the stiffness (value) and the mass (time
    /// derivative of the value), so g = -(K_bc w + M_bc dw/dtau) per side.
    pub fn boundary_source(&self, tau: f64) -> Vec<f64> {
        let (w_lo, dw_lo) = self.bc.lo(tau);
        let (w_hi, dw_hi) = self.bc.hi(tau);
        let dim = self.pair.dim();
        let mut g = vec![0.0; dim];
        for r in 0..dim {
            g[r] = -(self.g_k_lo[r] * w_lo + self.g_m_lo[r] * dw_lo + self.g_k_hi[r] * w_hi + self.g_m_hi[r] * dw_hi);
        }
        g
    }

    /// Expands an unknown vector to the full n_x * n_y grid (x fastest),
    /// filling the Dirichlet columns with the boundary data at `tau`.
    pub fn expand_with_boundary(&self, u: &[f64], tau: f64) -> Vec<f64> {
        let (n, m) = (self.grid.n_x, self.grid.n_y);
        let (w_lo, _) = self.bc.lo(tau);
        let (w_hi, _) = self.bc.hi(tau);
        let mut full = vec![0.0; n * m];
        for j in 0..m {
            full[j * n] = w_lo;
            full[j * n + n - 1] = w_hi;
            for i in 1..n - 1 {
                full[j * n + i] = u[self.grid.index(i, j)];
            }
        }
        full
    }
}

impl OdeSystem for SemiDiscreteSystem {
    fn dim(&self) -> usize {
        self.pair.dim()
    }

    fn mass_mul(&self, x: &[f64], out: &mut [f64]) {
        self.pair.mass().mul_vec(x, out);
    }

    fn stiffness_mul(&self, x: &[f64], out: &mut [f64]) {
        self.pair.stiffness().mul_vec(x, out);
    }

    fn source(&self, tau: f64) -> Vec<f64> {
        self.boundary_source(tau)
    }

    fn symbolic(&self) -> Result<FactorSymbolic> {
        self.pair.symbolic()
    }

    fn factorize(&self, alpha_mass: f64, beta_stiff: f64, symbolic: Option<&FactorSymbolic>) -> Result<LinearSolveHandle> {
        self.pair.factorize_combo(alpha_mass, beta_stiff, symbolic)
    }
}

/// Samples the smoothed transformed payoff on the unknown grid.
///
/// The payoff depends on x only; the x-line is sampled two nodes beyond each
/// grid end (the payoff formula extends analytically) so every unknown column
/// receives the full smoothing kernel, then the smoothed line is tiled over
/// the y rows.
pub fn initial_vector(grid: &Grid, p: &ModelParams, smoothing: bool) -> Vec<f64> {
    let n = grid.n_x;
    let line: Vec<f64> = if smoothing {
        let extended: Vec<f64> =
            (0..n + 4).map(|k| initial_condition(grid.x_min + grid.h * (k as f64 - 2.0), p)).collect();
        let sm = smooth_initial(&extended, grid.h);
        sm[3..n + 1].to_vec()
    } else {
        (1..n - 1).map(|i| initial_condition(grid.x(i), p)).collect()
    };
    let mut u = Vec::with_capacity(grid.unknowns());
    for _ in 0..grid.n_y {
        u.extend_from_slice(&line);
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;

    fn garch() -> ModelParams {
        ModelParams::garch(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap()
    }

    fn small_grid() -> Grid {
        build_grid(&garch(), (1.5, 600.0), (0.1, 0.5), 41).unwrap()
    }

    #[test]
    fn grid_examples() {
        let heston = ModelParams::heston(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap();
        let g = build_grid(&heston, (1.5, 600.0), (0.1, 0.5), 201).unwrap();
        assert!((g.x_min - (0.015f64).ln()).abs() < 1e-12);
        assert!((g.x_max - (6.0f64).ln()).abs() < 1e-12);
        assert!((g.h - (g.x_max - g.x_min) / 200.0).abs() < 1e-15);

        let gg = build_grid(&garch(), (1.5, 600.0), (0.1, 0.5), 201).unwrap();
        assert!((gg.y_min - 0.1f64.sqrt() / 0.3).abs() < 1e-12);
        assert!(gg.y_max >= 0.5f64.sqrt() / 0.3);
        assert!(gg.y_max - 0.5f64.sqrt() / 0.3 < gg.h);

        assert!(build_grid(&garch(), (600.0, 1.5), (0.1, 0.5), 201).is_err());
        assert!(build_grid(&garch(), (1.5, 600.0), (0.1, 0.5), 3).is_err());
    }

    #[test]
    fn ghost_weights_reproduce_quartics() {
        for deg in 0..=4u32 {
            let p = |t: f64| (t + 0.3).powi(deg as i32);
            let extrapolated: f64 = (0..5).map(|k| GHOST_WEIGHTS[k] * p(k as f64)).sum();
            assert!(
                (extrapolated - p(-1.0)).abs() < 1e-10,
                "degree {deg}: {extrapolated} vs {}",
                p(-1.0)
            );
        }
    }

    #[test]
    fn assembly_is_deterministic_and_sparse() {
        let p = garch();
        let grid = small_grid();
        let coeffs = TransformedCoeffs::new(&p);
        let s1 = assemble(&grid, &coeffs, BoundarySpec::european_put(&p, &grid)).unwrap();
        let s2 = assemble(&grid, &coeffs, BoundarySpec::european_put(&p, &grid)).unwrap();
        // bit-identical values
        for r in 0..s1.dim() {
            let (c1, v1) = s1.mass().row(r);
            let (c2, v2) = s2.mass().row(r);
            assert_eq!(c1, c2);
            assert_eq!(v1, v2);
        }
        // interior rows: at most 9 nonzeros, bandwidth within one x-block
        let width = grid.n_x - 2;
        for j in 1..grid.n_y - 1 {
            for i in 1..grid.n_x - 1 {
                let r = grid.index(i, j);
                let (cols, _) = s1.stiffness().row(r);
                assert!(cols.len() <= 9, "row ({i},{j}) has {} nonzeros", cols.len());
                for &c in cols {
                    assert!(c.abs_diff(r) <= width + 1, "bandwidth violated at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn mass_rows_preserve_constants_and_k_annihilates_them() {
        let p = garch();
        let grid = small_grid();
        let coeffs = TransformedCoeffs::new(&p);
        let sys = assemble(&grid, &coeffs, BoundarySpec::zero()).unwrap();
        let ones = vec![1.0; sys.dim()];
        let mut m_ones = vec![0.0; sys.dim()];
        sys.mass_mul(&ones, &mut m_ones);
        let mut k_ones = vec![0.0; sys.dim()];
        sys.stiffness_mul(&ones, &mut k_ones);
        for j in 0..grid.n_y {
            for i in 2..grid.n_x - 2 {
                // rows not coupled to the eliminated boundary columns
                let r = grid.index(i, j);
                assert!((m_ones[r] - 1.0).abs() < 1e-12, "mass row sum at ({i},{j}) = {}", m_ones[r]);
                assert!(k_ones[r].abs() < 1e-9, "stiffness row sum at ({i},{j}) = {}", k_ones[r]);
            }
        }
    }

    #[test]
    fn zero_boundary_data_gives_zero_source() {
        let p = garch();
        let grid = small_grid();
        let sys = assemble(&grid, &TransformedCoeffs::new(&p), BoundarySpec::zero()).unwrap();
        assert!(norm2(&sys.boundary_source(0.0)) == 0.0);
        assert!(norm2(&sys.boundary_source(1.0)) == 0.0);
    }

    #[test]
    fn put_boundary_source_lives_near_x_min() {
        let p = garch();
        let grid = small_grid();
        let sys = assemble(&grid, &TransformedCoeffs::new(&p), BoundarySpec::european_put(&p, &grid)).unwrap();
        let g = sys.boundary_source(0.5);
        // nonzero entries only on rows whose stencil touches a boundary column
        for j in 0..grid.n_y {
            for i in 2..grid.n_x - 2 {
                assert_eq!(g[grid.index(i, j)], 0.0);
            }
            assert!(g[grid.index(1, j)] != 0.0);
        }
        // boundary values themselves follow the put bound
        let (w0, _) = sys.boundary().lo(0.0);
        assert!((w0 - (1.0 - (grid.x_min / p.x_scale()).exp())).abs() < 1e-15);
        let (w_hi, _) = sys.boundary().hi(0.7);
        assert_eq!(w_hi, 0.0);
        let tau = 0.8;
        let (w_lo, dw_lo) = sys.boundary().lo(tau);
        let e = (grid.x_min / p.x_scale()).exp();
        assert!((w_lo - (1.0 - (p.r * tau).exp() * e)).abs() < 1e-15);
        assert!((dw_lo - (-p.r * (p.r * tau).exp() * e)).abs() < 1e-15);
    }

    #[test]
    fn initial_vector_smoothing_toggles() {
        let p = garch();
        let grid = small_grid();
        let raw = initial_vector(&grid, &p, false);
        let smoothed = initial_vector(&grid, &p, true);
        assert_eq!(raw.len(), grid.unknowns());
        assert_eq!(smoothed.len(), grid.unknowns());
        // identical away from the kink at x = 0
        for i in 1..grid.n_x - 1 {
            if (grid.x(i)).abs() > 4.0 * grid.h {
                assert!((raw[grid.index(i, 0)] - smoothed[grid.index(i, 0)]).abs() < 1e-13);
            }
        }
        // y-independence
        for i in 1..grid.n_x - 1 {
            assert_eq!(smoothed[grid.index(i, 0)], smoothed[grid.index(i, grid.n_y - 1)]);
        }
        assert_ne!(raw, smoothed);
    }
}
