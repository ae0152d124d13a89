//! Fourth-order compact 9-point stencil weights for one grid row.
//!
//! The second-order central discretisation of
//! `u_tau + a(u_xx + u_yy) + b u_xy + c1 u_x + c2 u_y = 0` leaves an O(h^2)
//! truncation term built from u_xxxx, u_yyyy, u_xxxy + u_xyyy, u_xxx and
//! u_yyy. Differentiating the equation itself (coefficients depend on y only)
//! expresses all of those through quantities that live on the 3x3 neighbourhood
//! (u_x .. u_xxyy) and through derivatives of u_tau, which end up as off-center
//! weights of the mass operator. The result is a (mass, stiffness) stencil pair
//! that is fourth-order consistent on the compact neighbourhood.

use crate::model::TransformedCoeffs;

/// Coefficient values and first two y-derivatives frozen at one grid row.
#[derive(Debug, Clone, Copy)]
pub struct CoeffSample {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub a_d1: f64,
    pub b_d1: f64,
    pub c1_d1: f64,
    pub c2_d1: f64,
    pub a_d2: f64,
    pub b_d2: f64,
    pub c1_d2: f64,
    pub c2_d2: f64,
}

impl CoeffSample {
    pub fn at(coeffs: &TransformedCoeffs, y: f64) -> Self {
        CoeffSample {
            a: coeffs.a.eval(y),
            b: coeffs.b.eval(y),
            c1: coeffs.c1.eval(y),
            c2: coeffs.c2.eval(y),
            a_d1: coeffs.a.d1(y),
            b_d1: coeffs.b.d1(y),
            c1_d1: coeffs.c1.d1(y),
            c2_d1: coeffs.c2.d1(y),
            a_d2: coeffs.a.d2(y),
            b_d2: coeffs.b.d2(y),
            c1_d2: coeffs.c1.d2(y),
            c2_d2: coeffs.c2.d2(y),
        }
    }

    /// Frozen (constant) coefficients, for consistency tests.
    pub fn frozen(a: f64, b: f64, c1: f64, c2: f64) -> Self {
        CoeffSample {
            a,
            b,
            c1,
            c2,
            a_d1: 0.0,
            b_d1: 0.0,
            c1_d1: 0.0,
            c2_d1: 0.0,
            a_d2: 0.0,
            b_d2: 0.0,
            c1_d2: 0.0,
            c2_d2: 0.0,
        }
    }
}

/// 3x3 stencil weights indexed `[dy + 1][dx + 1]`, dy/dx in {-1, 0, 1}.
pub type Weights = [[f64; 3]; 3];

/// Mass and stiffness stencils of one interior row.
#[derive(Debug, Clone, Copy)]
pub struct NodeStencil {
    pub mass: Weights,
    pub stiffness: Weights,
}

fn scaled(base: [[f64; 3]; 3], s: f64) -> Weights {
    let mut w = base;
    for row in &mut w {
        for v in row {
            *v *= s;
        }
    }
    w
}

fn add_scaled(acc: &mut Weights, w: &Weights, s: f64) {
    for dy in 0..3 {
        for dx in 0..3 {
            acc[dy][dx] += s * w[dy][dx];
        }
    }
}

/// Compact central-difference operators on the uniform square mesh.
struct Ops {
    ident: Weights,
    dx: Weights,
    dy: Weights,
    dxx: Weights,
    dyy: Weights,
    dxy: Weights,
    dxxy: Weights,
    dxyy: Weights,
    dxxyy: Weights,
}

impl Ops {
    fn new(h: f64) -> Self {
        let h2 = h * h;
        let h3 = h2 * h;
        let h4 = h2 * h2;
        Ops {
            ident: [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]],
            dx: scaled([[0.0, 0.0, 0.0], [-1.0, 0.0, 1.0], [0.0, 0.0, 0.0]], 1.0 / (2.0 * h)),
            dy: scaled([[0.0, -1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]], 1.0 / (2.0 * h)),
            dxx: scaled([[0.0, 0.0, 0.0], [1.0, -2.0, 1.0], [0.0, 0.0, 0.0]], 1.0 / h2),
            dyy: scaled([[0.0, 1.0, 0.0], [0.0, -2.0, 0.0], [0.0, 1.0, 0.0]], 1.0 / h2),
            dxy: scaled([[1.0, 0.0, -1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 1.0]], 1.0 / (4.0 * h2)),
            dxxy: scaled([[-1.0, 2.0, -1.0], [0.0, 0.0, 0.0], [1.0, -2.0, 1.0]], 1.0 / (2.0 * h3)),
            dxyy: scaled([[-1.0, 0.0, 1.0], [2.0, 0.0, -2.0], [-1.0, 0.0, 1.0]], 1.0 / (2.0 * h3)),
            dxxyy: scaled([[1.0, -2.0, 1.0], [-2.0, 4.0, -2.0], [1.0, -2.0, 1.0]], 1.0 / h4),
        }
    }
}

/// Builds the fourth-order compact (mass, stiffness) stencil pair for a row
/// with coefficient sample `c` and mesh width `h`.
pub fn hoc_row_stencil(h: f64, c: &CoeffSample) -> NodeStencil {
    let ops = Ops::new(h);
    let (a, b, c1, c2) = (c.a, c.b, c.c1, c.c2);
    let (ap, bp, c1p, c2p) = (c.a_d1, c.b_d1, c.c1_d1, c.c2_d1);
    let (app, bpp, c1pp, c2pp) = (c.a_d2, c.b_d2, c.c1_d2, c.c2_d2);
    let a2 = a * a;

    // correction coefficients of the eliminated truncation term
    let r_ux = (-a * c1pp + 2.0 * ap * c1p - c1p * c2) / a;
    let r_uy = (-a * c2pp + 2.0 * ap * c2p - c2 * c2p) / a;
    let r_uxx = (-a2 * app - a * (-2.0 * ap * ap + ap * c2 + b * c1p + c1 * c1) + ap * b * c1) / a2;
    let r_uyy = (-a * (app + 2.0 * c2p) + 2.0 * ap * ap + ap * c2 - c2 * c2) / a;
    let r_uxy = (-a2 * (bpp + 2.0 * c1p)
        - a * (-2.0 * ap * bp - 2.0 * ap * c1 + b * c2p + bp * c2 + 2.0 * c1 * c2)
        + ap * b * c2)
        / a2;
    let r_uxxy = (-2.0 * a2 * c2 - a * b * (bp + 2.0 * c1) + ap * b * b) / a2;
    let r_uxyy = 2.0 * (-a * (bp + c1) + ap * b - b * c2) / a;
    let r_uxxyy = -2.0 * a - b * b / a;
    // first-derivative weights of the mass operator
    let g_x = (-a * c1 + ap * b) / a2;
    let g_y = (2.0 * ap - c2) / a;

    let s = h * h / 12.0;

    // K = a(dxx + dyy) + b dxy + c1 dx + c2 dy - (h^2/12) sum r_* D_*
    let mut stiffness = [[0.0; 3]; 3];
    add_scaled(&mut stiffness, &ops.dxx, a);
    add_scaled(&mut stiffness, &ops.dyy, a);
    add_scaled(&mut stiffness, &ops.dxy, b);
    add_scaled(&mut stiffness, &ops.dx, c1);
    add_scaled(&mut stiffness, &ops.dy, c2);
    add_scaled(&mut stiffness, &ops.dx, -s * r_ux);
    add_scaled(&mut stiffness, &ops.dy, -s * r_uy);
    add_scaled(&mut stiffness, &ops.dxx, -s * r_uxx);
    add_scaled(&mut stiffness, &ops.dyy, -s * r_uyy);
    add_scaled(&mut stiffness, &ops.dxy, -s * r_uxy);
    add_scaled(&mut stiffness, &ops.dxxy, -s * r_uxxy);
    add_scaled(&mut stiffness, &ops.dxyy, -s * r_uxyy);
    add_scaled(&mut stiffness, &ops.dxxyy, -s * r_uxxyy);

    // M = I + (h^2/12) [dxx + dyy + (b/a) dxy - g_x dx - g_y dy]
    let mut mass = ops.ident;
    add_scaled(&mut mass, &ops.dxx, s);
    add_scaled(&mut mass, &ops.dyy, s);
    add_scaled(&mut mass, &ops.dxy, s * b / a);
    add_scaled(&mut mass, &ops.dx, -s * g_x);
    add_scaled(&mut mass, &ops.dy, -s * g_y);

    NodeStencil { mass, stiffness }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_row_sum_is_one() {
        let c = CoeffSample::frozen(-0.7, 0.4, 1.1, -0.6);
        let st = hoc_row_stencil(0.05, &c);
        let sum: f64 = st.mass.iter().flatten().sum();
        assert!((sum - 1.0).abs() < 1e-14);
        // stiffness annihilates constants: row sum 0
        let ksum: f64 = st.stiffness.iter().flatten().sum();
        assert!(ksum.abs() < 1e-12);
    }

    #[test]
    fn pure_diffusion_reduces_to_classic_compact_pair() {
        // a = -1, no convection: M must be the (1, 10, 1)/12-type operator in
        // each direction and K the 9-point corrected Laplacian.
        let h = 0.1;
        let st = hoc_row_stencil(h, &CoeffSample::frozen(-1.0, 0.0, 0.0, 0.0));
        assert!((st.mass[1][1] - 8.0 / 12.0).abs() < 1e-15);
        for (dy, dx) in [(0, 1), (2, 1), (1, 0), (1, 2)] {
            assert!((st.mass[dy][dx] - 1.0 / 12.0).abs() < 1e-15);
        }
        for (dy, dx) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            assert!(st.mass[dy][dx].abs() < 1e-15);
        }
        // K corner weight: a*(h^2/6)*dxxyy corner = -1/(6 h^2)
        assert!((st.stiffness[0][0] + 1.0 / (6.0 * h * h)).abs() < 1e-10);
    }
}
