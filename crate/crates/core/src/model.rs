//! Stochastic volatility model family, coordinate transformations and the
//! transformed PDE coefficients.
//!
//! The asset/variance dynamics are
//!
//! ```text
//! dS = mu S dt + sqrt(v) S dW1,    dv = kappa v^a (theta - v) dt + sigma v^b dW2,
//! ```
//!
//! with correlation rho between the Brownian drivers. Named members: Heston/SQR
//! (a=0, b=1/2), GARCH/VAR (0, 1), 3/2 (0, 3/2), SQR-N (1, 1/2), VAR-N (1, 1),
//! 3/2-N (1, 3/2). Pricing works on the transformed equation
//!
//! ```text
//! u_tau + a(y)(u_xx + u_yy) + b(y) u_xy + c1(y) u_x + c2(y) u_y = 0,
//! ```
//!
//! where tau = T - t, u = exp(r tau) V / K, and (x, y) are chosen per branch of
//! b so the two second-derivative coefficients coincide:
//! x = (3/2-b) ln(S/K), y = v^(3/2-b)/sigma for b != 3/2, and x = ln(S/K),
//! y = ln(v)/sigma for b = 3/2. Real-world drift mu never enters the pricing
//! PDE; only the risk-free rate r does.

use crate::error::{Error, Result};

/// Parameter set of the model family plus contract terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Mean-reversion exponent, a >= 0.
    pub a: f64,
    /// Vol-of-vol exponent, b in (0, 3/2].
    pub b: f64,
    /// Mean-reversion speed, kappa > 0.
    pub kappa: f64,
    /// Long-run variance, theta > 0.
    pub theta: f64,
    /// Volatility of volatility, sigma > 0.
    pub sigma: f64,
    /// Correlation between the two Brownian motions, in [-1, 1].
    pub rho: f64,
    /// Risk-free rate, r >= 0.
    pub r: f64,
    /// Strike K > 0.
    pub strike: f64,
    /// Maturity T > 0.
    pub maturity: f64,
}

impl ModelParams {
    /// Validated constructor for a custom (a, b) member of the family.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        a: f64,
        b: f64,
        kappa: f64,
        theta: f64,
        sigma: f64,
        rho: f64,
        r: f64,
        strike: f64,
        maturity: f64,
    ) -> Result<Self> {
        let p = Self { a, b, kappa, theta, sigma, rho, r, strike, maturity };
        p.validate()?;
        Ok(p)
    }

    /// Heston (SQR) model: a = 0, b = 1/2.
    pub fn heston(kappa: f64, theta: f64, sigma: f64, rho: f64, r: f64, strike: f64, maturity: f64) -> Result<Self> {
        Self::custom(0.0, 0.5, kappa, theta, sigma, rho, r, strike, maturity)
    }

    /// GARCH (VAR) model: a = 0, b = 1.
    pub fn garch(kappa: f64, theta: f64, sigma: f64, rho: f64, r: f64, strike: f64, maturity: f64) -> Result<Self> {
        Self::custom(0.0, 1.0, kappa, theta, sigma, rho, r, strike, maturity)
    }

    /// 3/2 model: a = 0, b = 3/2.
    pub fn three_halves(kappa: f64, theta: f64, sigma: f64, rho: f64, r: f64, strike: f64, maturity: f64) -> Result<Self> {
        Self::custom(0.0, 1.5, kappa, theta, sigma, rho, r, strike, maturity)
    }

    /// SQR-N model (nonlinear mean reversion): a = 1, b = 1/2.
    pub fn sqr_n(kappa: f64, theta: f64, sigma: f64, rho: f64, r: f64, strike: f64, maturity: f64) -> Result<Self> {
        Self::custom(1.0, 0.5, kappa, theta, sigma, rho, r, strike, maturity)
    }

    /// VAR-N model: a = 1, b = 1.
    pub fn var_n(kappa: f64, theta: f64, sigma: f64, rho: f64, r: f64, strike: f64, maturity: f64) -> Result<Self> {
        Self::custom(1.0, 1.0, kappa, theta, sigma, rho, r, strike, maturity)
    }

    /// 3/2-N model: a = 1, b = 3/2.
    pub fn three_halves_n(kappa: f64, theta: f64, sigma: f64, rho: f64, r: f64, strike: f64, maturity: f64) -> Result<Self> {
        Self::custom(1.0, 1.5, kappa, theta, sigma, rho, r, strike, maturity)
    }

    fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Config(msg.to_string())) };
        check(self.a >= 0.0 && self.a.is_finite(), "exponent a must satisfy a >= 0")?;
        check(self.b > 0.0 && self.b <= 1.5, "exponent b must lie in (0, 3/2]")?;
        check(self.kappa > 0.0, "kappa must be positive")?;
        check(self.theta > 0.0, "theta must be positive")?;
        check(self.sigma > 0.0, "sigma must be positive")?;
        check((-1.0..=1.0).contains(&self.rho), "rho must lie in [-1, 1]")?;
        check(self.r >= 0.0, "r must be nonnegative")?;
        check(self.strike > 0.0, "strike must be positive")?;
        check(self.maturity > 0.0, "maturity must be positive")?;
        Ok(())
    }

    /// Whether the logarithmic variance transformation applies (b = 3/2 exactly).
    pub fn is_log_branch(&self) -> bool {
        self.b == 1.5
    }

    /// Exponent phi = 3/2 - b of the power-law branch.
    pub fn phi(&self) -> f64 {
        1.5 - self.b
    }

    /// x = phi ln(S/K) on the power branch, x = ln(S/K) on the log branch.
    pub fn x_scale(&self) -> f64 {
        if self.is_log_branch() { 1.0 } else { self.phi() }
    }
}

/// Maps physical coordinates (S, v) to computational coordinates (x, y).
pub fn transform_to_computational(s: f64, v: f64, p: &ModelParams) -> Result<(f64, f64)> {
    if s <= 0.0 || v <= 0.0 {
        return Err(Error::Domain(format!("transform requires S > 0 and v > 0, got S = {s}, v = {v}")));
    }
    if p.is_log_branch() {
        Ok(((s / p.strike).ln(), v.ln() / p.sigma))
    } else {
        let phi = p.phi();
        Ok((phi * (s / p.strike).ln(), v.powf(phi) / p.sigma))
    }
}

/// Inverse of [`transform_to_computational`].
pub fn inverse_transform(x: f64, y: f64, p: &ModelParams) -> Result<(f64, f64)> {
    if p.is_log_branch() {
        Ok((p.strike * x.exp(), (p.sigma * y).exp()))
    } else {
        if y <= 0.0 {
            return Err(Error::Domain(format!("inverse transform requires y > 0 on the power-law branch, got y = {y}")));
        }
        let phi = p.phi();
        Ok((p.strike * (x / phi).exp(), (p.sigma * y).powf(1.0 / phi)))
    }
}

/// Transformed initial condition u(x, y, 0); independent of y.
pub fn initial_condition(x: f64, p: &ModelParams) -> f64 {
    (1.0 - (x / p.x_scale()).exp()).max(0.0)
}

/// One term of a coefficient function: either c y^p or c e^(q y).
#[derive(Debug, Clone, Copy)]
enum Term {
    Power { c: f64, p: f64 },
    Exp { c: f64, q: f64 },
}

/// Scalar coefficient function of the transformed volatility coordinate,
/// with exact first and second derivatives.
#[derive(Debug, Clone)]
pub struct CoeffFn {
    terms: Vec<Term>,
}

impl CoeffFn {
    fn power(terms: &[(f64, f64)]) -> Self {
        Self { terms: terms.iter().map(|&(c, p)| Term::Power { c, p }).collect() }
    }

    fn exp(terms: &[(f64, f64)]) -> Self {
        Self { terms: terms.iter().map(|&(c, q)| Term::Exp { c, q }).collect() }
    }

    fn has_negative_exponent(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, Term::Power { p, .. } if *p < 0.0))
    }

    fn is_power_branch(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, Term::Power { .. }))
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Power { c, p } => {
                    if p == 0.0 {
                        c
                    } else {
                        c * y.powf(p)
                    }
                }
                Term::Exp { c, q } => c * (q * y).exp(),
            })
            .sum()
    }

    pub fn d1(&self, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Power { c, p } => {
                    if p == 0.0 {
                        0.0
                    } else {
                        c * p * y.powf(p - 1.0)
                    }
                }
                Term::Exp { c, q } => c * q * (q * y).exp(),
            })
            .sum()
    }

    pub fn d2(&self, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Power { c, p } => {
                    if p == 0.0 || p == 1.0 {
                        0.0
                    } else {
                        c * p * (p - 1.0) * y.powf(p - 2.0)
                    }
                }
                Term::Exp { c, q } => c * q * q * (q * y).exp(),
            })
            .sum()
    }
}

/// The four coefficient functions a(y), b(y), c1(y), c2(y) of the transformed
/// equation for the selected branch of b.
#[derive(Debug, Clone)]
pub struct TransformedCoeffs {
    pub a: CoeffFn,
    pub b: CoeffFn,
    pub c1: CoeffFn,
    pub c2: CoeffFn,
}

impl TransformedCoeffs {
    pub fn new(p: &ModelParams) -> Self {
        let (kappa, theta, sigma, rho, r) = (p.kappa, p.theta, p.sigma, p.rho, p.r);
        if p.is_log_branch() {
            // a(y) = -e^(sigma y)/2, b = 2 rho a,
            // c1(y) = e^(sigma y)/2 - r,
            // c2(y) = (sigma^2 e^(sigma y) - 2 kappa theta e^(sigma y (a-1)) + 2 kappa e^(a sigma y)) / (2 sigma)
            let am = p.a;
            let a = CoeffFn::exp(&[(-0.5, sigma)]);
            let b = CoeffFn::exp(&[(-rho, sigma)]);
            let c1 = CoeffFn::exp(&[(0.5, sigma), (-r, 0.0)]);
            let c2 = CoeffFn::exp(&[
                (sigma / 2.0, sigma),
                (-kappa * theta / sigma, sigma * (am - 1.0)),
                (kappa / sigma, sigma * am),
            ]);
            Self { a, b, c1, c2 }
        } else {
            // With phi = 3/2 - b and v = (sigma y)^(1/phi):
            //   a(y)  = -(phi^2/2) v
            //   b(y)  = 2 rho a(y)
            //   c1(y) = phi (v/2 - r)
            //   c2(y) = -(sigma phi (phi-1)/2) v^(b-1/2)
            //           - (kappa phi theta / sigma) v^(a+phi-1)
            //           + (kappa phi / sigma) v^(a+phi)
            // written below as sums of c y^p with v^m = sigma^(m/phi) y^(m/phi).
            let phi = p.phi();
            let am = p.a;
            let vpow = |coef: f64, m: f64| (coef * sigma.powf(m / phi), m / phi);
            let a_term = vpow(-phi * phi / 2.0, 1.0);
            let a = CoeffFn::power(&[a_term]);
            let b = CoeffFn::power(&[(2.0 * rho * a_term.0, a_term.1)]);
            let c1 = CoeffFn::power(&[vpow(phi / 2.0, 1.0), (-r * phi, 0.0)]);
            let c2 = CoeffFn::power(&[
                vpow(-sigma * phi * (phi - 1.0) / 2.0, p.b - 0.5),
                vpow(-kappa * phi * theta / sigma, am + phi - 1.0),
                vpow(kappa * phi / sigma, am + phi),
            ]);
            Self { a, b, c1, c2 }
        }
    }

    /// Guards evaluation on the power-law branch where negative powers of y occur.
    pub fn check_node(&self, y: f64) -> Result<()> {
        if self.a.is_power_branch() && y <= 0.0 {
            let msg = if self.c2.has_negative_exponent() || self.c1.has_negative_exponent() {
                format!("coefficient singularity at y = {y} (negative power of y)")
            } else {
                format!("power-law branch requires y > 0, got y = {y}")
            };
            return Err(Error::Domain(msg));
        }
        Ok(())
    }
}

/// Pointwise values of the four PDE coefficients at a node y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeCoefficients {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Evaluates the transformed-equation coefficients at y for the branch selected
/// by p.b.
pub fn pde_coefficients(y: f64, p: &ModelParams) -> Result<PdeCoefficients> {
    let c = TransformedCoeffs::new(p);
    c.check_node(y)?;
    Ok(PdeCoefficients { a: c.a.eval(y), b: c.b.eval(y), c1: c.c1.eval(y), c2: c.c2.eval(y) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn garch() -> ModelParams {
        ModelParams::garch(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap()
    }

    fn heston() -> ModelParams {
        ModelParams::heston(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap()
    }

    #[test]
    fn named_models_fix_exponents() {
        let mk = |f: fn(f64, f64, f64, f64, f64, f64, f64) -> Result<ModelParams>| {
            f(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap()
        };
        for (p, a, b) in [
            (mk(ModelParams::heston), 0.0, 0.5),
            (mk(ModelParams::garch), 0.0, 1.0),
            (mk(ModelParams::three_halves), 0.0, 1.5),
            (mk(ModelParams::sqr_n), 1.0, 0.5),
            (mk(ModelParams::var_n), 1.0, 1.0),
            (mk(ModelParams::three_halves_n), 1.0, 1.5),
        ] {
            assert_eq!((p.a, p.b), (a, b));
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ModelParams::custom(0.0, 0.0, 1.0, 0.3, 0.3, 0.0, 0.05, 100.0, 1.0).is_err());
        assert!(ModelParams::custom(0.0, 1.6, 1.0, 0.3, 0.3, 0.0, 0.05, 100.0, 1.0).is_err());
        assert!(ModelParams::custom(-0.1, 1.0, 1.0, 0.3, 0.3, 0.0, 0.05, 100.0, 1.0).is_err());
        assert!(ModelParams::custom(0.0, 1.0, 1.0, 0.3, 0.3, 1.5, 0.05, 100.0, 1.0).is_err());
        assert!(ModelParams::custom(0.0, 1.0, 1.0, 0.3, -0.3, 0.0, 0.05, 100.0, 1.0).is_err());
        // every b in (0, 3/2) goes to the power branch, 3/2 itself to the log branch
        assert!(ModelParams::custom(0.0, 1.49999, 1.0, 0.3, 0.3, 0.0, 0.05, 100.0, 1.0).unwrap().phi() > 0.0);
        assert!(ModelParams::custom(0.0, 1.5, 1.0, 0.3, 0.3, 0.0, 0.05, 100.0, 1.0).unwrap().is_log_branch());
    }

    #[test]
    fn transform_examples() {
        // at-the-money maps to x = 0
        let (x, _) = transform_to_computational(100.0, 0.09, &heston()).unwrap();
        assert_eq!(x, 0.0);
        // GARCH: y = sqrt(v)/sigma, x = ln(S/K)/2
        let p = garch();
        let (x, y) = transform_to_computational(100.0 * (2.0f64).exp().powi(2), 0.09, &p).unwrap();
        assert!((y - 1.0).abs() < 1e-14);
        assert!((x - 1.0).abs() < 1e-14);
        // log branch: v = 1 maps to y = 0
        let p32 = ModelParams::three_halves(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap();
        let (_, y) = transform_to_computational(100.0, 1.0, &p32).unwrap();
        assert_eq!(y, 0.0);
        assert!(transform_to_computational(-1.0, 0.1, &p).is_err());
        assert!(transform_to_computational(1.0, 0.0, &p).is_err());
    }

    #[test]
    fn inverse_examples() {
        let p = garch();
        let (s, v) = inverse_transform(0.0, 1.0, &p).unwrap();
        assert!((s - 100.0).abs() < 1e-12);
        assert!((v - 0.09).abs() < 1e-15);
        let p32 = ModelParams::three_halves(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap();
        let (_, v) = inverse_transform(0.0, 0.0, &p32).unwrap();
        assert_eq!(v, 1.0);
        assert!(inverse_transform(0.0, 0.0, &p).is_err());
    }

    #[test]
    fn round_trip_all_named_models() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let models = [
            heston(),
            garch(),
            ModelParams::three_halves(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap(),
            ModelParams::sqr_n(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap(),
            ModelParams::var_n(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap(),
            ModelParams::three_halves_n(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap(),
        ];
        for p in &models {
            for _ in 0..1000 {
                let s = rng.random_range(1.5..600.0);
                let v = rng.random_range(0.1..0.5);
                let (x, y) = transform_to_computational(s, v, p).unwrap();
                let (s2, v2) = inverse_transform(x, y, p).unwrap();
                assert!(((s2 - s) / s).abs() <= 1e-12, "S round trip failed: {s} -> {s2}");
                assert!(((v2 - v) / v).abs() <= 1e-12, "v round trip failed: {v} -> {v2}");
            }
        }
    }

    #[test]
    fn garch_coefficient_values() {
        let p = garch();
        let c = pde_coefficients(1.0, &p).unwrap();
        assert!((c.a - (-0.01125)).abs() < 1e-15);
        assert!((c.b - 0.009).abs() < 1e-15);
        assert!((c.c1 - (-0.0025)).abs() < 1e-15);
        // c2(y) = sigma^2 y / 8 - kappa theta / (2 sigma^2 y) + kappa y / 2
        let expect = 0.09 / 8.0 - 1.1 * 0.3 / (2.0 * 0.09) + 1.1 / 2.0;
        assert!((c.c2 - expect).abs() < 1e-12, "c2 = {}, expect {expect}", c.c2);
    }

    #[test]
    fn log_branch_coefficient_values() {
        let p = ModelParams::three_halves(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap();
        let c = pde_coefficients(0.0, &p).unwrap();
        assert!((c.a - (-0.5)).abs() < 1e-15);
        assert!((c.c1 - 0.45).abs() < 1e-15);
        assert!((c.b - 0.4).abs() < 1e-15); // -rho e^0 = 0.4
    }

    #[test]
    fn coefficient_singularity_at_zero() {
        // GARCH c2 carries v^(-1/2) ~ y^(-1): singular at y = 0
        assert!(pde_coefficients(0.0, &garch()).is_err());
    }

    #[test]
    fn coefficient_derivatives_match_finite_differences() {
        for p in [garch(), heston(), ModelParams::three_halves(1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap()] {
            let c = TransformedCoeffs::new(&p);
            let y0 = if p.is_log_branch() { -3.0 } else { 1.3 };
            let h = 1e-5;
            for f in [&c.a, &c.b, &c.c1, &c.c2] {
                let d1_fd = (f.eval(y0 + h) - f.eval(y0 - h)) / (2.0 * h);
                let d2_fd = (f.eval(y0 + h) - 2.0 * f.eval(y0) + f.eval(y0 - h)) / (h * h);
                assert!((f.d1(y0) - d1_fd).abs() < 1e-7 * (1.0 + f.d1(y0).abs()));
                assert!((f.d2(y0) - d2_fd).abs() < 1e-4 * (1.0 + f.d2(y0).abs()));
            }
        }
    }

    #[test]
    fn initial_condition_examples() {
        let p = garch();
        assert_eq!(initial_condition(0.0, &p), 0.0);
        assert!((initial_condition(-30.0, &p) - 1.0).abs() < 1e-15);
        // GARCH: x = -(1/2) ln 2 gives exponent -ln 2, so u0 = 1/2
        let x = -0.5 * (2.0f64).ln();
        assert!((initial_condition(x, &p) - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn mixed_coefficient_ratio_is_two_rho(
            b in 0.05f64..1.5f64,
            rho in -1.0f64..1.0f64,
            y in 0.2f64..3.0f64,
        ) {
            let p = ModelParams::custom(0.7, b, 1.1, 0.3, 0.3, rho, 0.05, 100.0, 2.0).unwrap();
            let c = pde_coefficients(y, &p).unwrap();
            prop_assert!((c.b / c.a - 2.0 * rho).abs() <= 1e-14);
            prop_assert!(c.a < 0.0);
        }

        #[test]
        fn initial_condition_monotone_and_bounded(
            b in 0.05f64..=1.5f64,
            x1 in -5.0f64..5.0f64,
            dx in 0.0f64..3.0f64,
        ) {
            let p = ModelParams::custom(0.0, b, 1.1, 0.3, 0.3, -0.4, 0.05, 100.0, 2.0).unwrap();
            let u1 = initial_condition(x1, &p);
            let u2 = initial_condition(x1 + dx, &p);
            prop_assert!(u2 <= u1);
            prop_assert!((0.0..1.0).contains(&u1));
        }
    }
}
