//! Payoff smoothing for the non-smooth initial condition.
//!
//! The kernel is the integer sampling of the classical fourth-order
//! B-spline mollifier (4/3) B3(t) - (1/6) (B3(t-1) + B3(t+1)): a discrete
//! convolution with weights (-1/36, 1/9, 5/6, 1/9, -1/36) at offsets -2..2.
//! The samples at |t| = 3 vanish, so the kernel support is [-3h, 3h]. Moments
//! 0..3 are exact, making the operator the identity on any local cubic, while
//! the fourth moment is nonzero, which is what damps the kink modes.

/// Smoothing weights at offsets -2..2.
pub const KERNEL: [f64; 5] = [-1.0 / 36.0, 1.0 / 9.0, 5.0 / 6.0, 1.0 / 9.0, -1.0 / 36.0];

/// Applies the order-4 smoothing kernel to equally spaced samples.
///
/// The two samples at each end are returned unchanged (the kernel would
/// reach outside the sampled range there; callers that need smoothed values
/// near a boundary pass an extended sample line and slice).
pub fn smooth_initial(samples: &[f64], _h: f64) -> Vec<f64> {
    let n = samples.len();
    if n < 5 {
        return samples.to_vec();
    }
    let mut out = samples.to_vec();
    for i in 2..n - 2 {
        let mut acc = 0.0;
        for (k, w) in KERNEL.iter().enumerate() {
            acc += w * samples[i + k - 2];
        }
        out[i] = acc;
    }
    out
}
