//! Deterministic reductions shared across modules.
//!
//! Reductions over replicate vectors must not depend on worker count, so
//! everything here consumes slices in their stored order. Pairwise recursion
//! also keeps rounding error O(log n) instead of O(n).

/// Sum in a fixed pairwise order.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of empty slice");
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance, two-pass.
pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    assert!(xs.len() >= 2, "variance needs at least two values");
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

/// Standard error of the sample mean: s / sqrt(R).
pub(crate) fn mean_stderr(xs: &[f64]) -> f64 {
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// Delete-one jackknife standard error of the unbiased sample variance.
///
/// Closed form: with centered values c_i and S2 = Σ c_i², the leave-one-out
/// variance is v_i = (S2 - c_i² - c_i²/(R-1)) / (R-2), so the whole jackknife
/// runs in O(R).
pub(crate) fn jackknife_variance_stderr(xs: &[f64]) -> f64 {
    let r = xs.len();
    assert!(r >= 3, "jackknife needs at least three values");
    let rf = r as f64;
    let m = mean(xs);
    let centered: Vec<f64> = xs.iter().map(|&x| x - m).collect();
    let sq: Vec<f64> = centered.iter().map(|&c| c * c).collect();
    let s2 = pairwise_sum(&sq);
    let loo: Vec<f64> = centered
        .iter()
        .map(|&c| (s2 - c * c - c * c / (rf - 1.0)) / (rf - 2.0))
        .collect();
    let loo_mean = mean(&loo);
    let dev_sq: Vec<f64> = loo.iter().map(|&v| (v - loo_mean) * (v - loo_mean)).collect();
    ((rf - 1.0) / rf * pairwise_sum(&dev_sq)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert_relative_eq!(pairwise_sum(&xs), naive, max_relative = 1e-12);
    }

    #[test]
    fn variance_of_known_sample() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(sample_variance(&xs), 5.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn jackknife_matches_direct_enumeration() {
        let xs = [0.3, -1.2, 2.5, 0.9, -0.4, 1.1, 0.0, -2.2];
        let r = xs.len();
        let mut loo = Vec::new();
        for i in 0..r {
            let rest: Vec<f64> = xs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &x)| x)
                .collect();
            loo.push(sample_variance(&rest));
        }
        let lm = mean(&loo);
        let direct = ((r as f64 - 1.0) / r as f64
            * loo.iter().map(|v| (v - lm) * (v - lm)).sum::<f64>())
        .sqrt();
        assert_relative_eq!(jackknife_variance_stderr(&xs), direct, max_relative = 1e-12);
    }
}
