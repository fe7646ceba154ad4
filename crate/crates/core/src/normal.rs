//! Standard normal density and distribution function.

use std::f64::consts::{PI, SQRT_2};

/// Density of N(0,1).
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Distribution function of N(0,1), accurate in both tails.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Upper tail 1 - Φ(x) without cancellation for large x.
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn cdf_reference_values() {
        assert_abs_diff_eq!(cdf(0.0), 0.5, epsilon = 1e-15);
        // Φ(1) and Φ(0.5) to published double precision.
        assert_abs_diff_eq!(cdf(1.0), 0.841344746068543, epsilon = 1e-14);
        assert_abs_diff_eq!(cdf(0.5), 0.691462461274013, epsilon = 1e-14);
        assert_relative_eq!(cdf(-3.0), 0.00134989803163009, max_relative = 1e-12);
    }

    #[test]
    fn tail_relative_accuracy() {
        // Mills-ratio check: sf(x) ~ pdf(x)/x·(1 - 1/x² + 3/x⁴ - ...) at x=8.
        let x = 8.0;
        let asym = pdf(x) / x * (1.0 - 1.0 / (x * x) + 3.0 / x.powi(4) - 15.0 / x.powi(6));
        assert_relative_eq!(sf(x), asym, max_relative = 1e-6);
        assert_relative_eq!(sf(3.0) + cdf(-3.0), 2.0 * cdf(-3.0), max_relative = 1e-13);
    }
}
