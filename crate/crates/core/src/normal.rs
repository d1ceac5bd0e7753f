//! Standard normal density and distribution function.

use libm::{erf, erfc};

/// 1/sqrt(2*pi)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// 1/sqrt(pi)
pub const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

#[inline]
pub fn std_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

#[inline]
pub fn std_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// `E|X|` for `X ~ N(mu, variance)`:
/// `2 sigma phi(mu / sigma) + mu (2 Phi(mu / sigma) - 1)`.
///
/// A zero variance gives the degenerate limit `|mu|`.
#[inline]
pub fn expected_abs(mu: f64, variance: f64) -> f64 {
    if !(variance > 0.0) {
        return mu.abs();
    }
    let sigma = variance.sqrt();
    let z = mu / sigma;
    2.0 * sigma * std_pdf(z) + mu * erf(z * std::f64::consts::FRAC_1_SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((std_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((std_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14, "{:e}", std_cdf(1.0) - 0.841_344_746_068_542_9);
        assert!((std_cdf(-1.959_963_984_540_054) - 0.025).abs() < 1e-14);
        assert!((std_pdf(0.0) - FRAC_1_SQRT_2PI).abs() < 1e-16);
        assert!((FRAC_1_SQRT_PI - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-16);
    }

    #[test]
    fn expected_abs_limits() {
        let s = 1.7f64;
        assert!((expected_abs(0.0, s * s) - s * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert_eq!(expected_abs(-2.5, 0.0), 2.5);
        // Far from zero the absolute value is essentially the mean.
        assert!((expected_abs(50.0, 1.0) - 50.0).abs() < 1e-12);
        assert!((expected_abs(-50.0, 1.0) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn far_tails_do_not_cancel() {
        assert!(std_cdf(-40.0) >= 0.0);
        assert!(std_cdf(-10.0) > 0.0);
        assert_eq!(std_cdf(40.0), 1.0);
    }
}
