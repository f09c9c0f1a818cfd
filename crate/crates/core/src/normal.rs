//! Standard normal distribution function and density.

use std::f64::consts::FRAC_1_SQRT_2;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF, Φ(z).
#[inline]
pub fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density, φ(z).
#[inline]
pub fn pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Derivative of the density, φ̇(z) = −z φ(z).
#[inline]
pub fn pdf_derivative(z: f64) -> f64 {
    -z * pdf(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constants_agree() {
        assert!((INV_SQRT_2PI - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn known_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert!((cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
        assert!((cdf(2.0_f64.sqrt()) - 0.921_350_396_474_857_3).abs() < 1e-15);
        assert!((cdf(-1.0) + cdf(1.0) - 1.0).abs() < 1e-16);
        assert!((pdf(0.0) - INV_SQRT_2PI).abs() < 1e-17);
        assert!(cdf(-40.0) >= 0.0 && cdf(40.0) == 1.0);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        for &z in &[-2.5, -0.3, 0.0, 0.7, 3.1] {
            let h = 1e-6;
            let fd = (pdf(z + h) - pdf(z - h)) / (2.0 * h);
            assert!((fd - pdf_derivative(z)).abs() < 1e-9);
            let fd_cdf = (cdf(z + h) - cdf(z - h)) / (2.0 * h);
            assert!((fd_cdf - pdf(z)).abs() < 1e-9);
        }
    }
}
