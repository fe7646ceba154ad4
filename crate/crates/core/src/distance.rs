//! Empirical distances between a Monte Carlo sample and the standard
//! normal law — total variation on a histogram bin algebra and the
//! one-sample Kolmogorov statistic — plus weighted log-log rate fitting
//! over an n-grid with a calibration-floor drop rule.

use crate::normal;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::Serialize;
use std::fmt;

/// Minimum sample size for the histogram TV estimator.
pub const TV_MIN_SAMPLES: usize = 1000;
/// Minimum sample size for the Kolmogorov statistic.
pub const KS_MIN_SAMPLES: usize = 100;
/// Minimum number of grid points a rate fit needs (after floor dropping).
pub const MIN_FIT_POINTS: usize = 4;
/// Bootstrap resamples behind the TV standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Default half-width of the binned region; mass beyond ±this is one tail cell.
pub const DEFAULT_RANGE_HALFWIDTH: f64 = 5.0;
/// Bin-count clamp around the R^{1/3} rule.
pub const MIN_BINS: usize = 20;
pub const MAX_BINS: usize = 200;
/// Asymptotic null scale of the Kolmogorov statistic: stderr ≈ 0.87/√R.
pub const KS_STDERR_SCALE: f64 = 0.87;
/// Rate fits drop grid points whose value is below this multiple of the
/// calibration floor.
pub const FLOOR_DROP_FACTOR: f64 = 2.0;
/// Relative stderr floor used in fit weights so exact synthetic inputs
/// (stderr = 0) stay finite.
const REL_STDERR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum DistanceError {
    TooFewSamples { got: usize, need: usize },
    TooFewPoints { got: usize, need: usize },
    NonPositiveValue { n: usize, value: f64 },
    NonIncreasingGrid,
}

impl fmt::Display for DistanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceError::TooFewSamples { got, need } => {
                write!(f, "need at least {need} samples, got {got}")
            }
            DistanceError::TooFewPoints { got, need } => {
                write!(f, "need at least {need} usable grid points, got {got}")
            }
            DistanceError::NonPositiveValue { n, value } => {
                write!(f, "distance value {value} at n={n} is not positive")
            }
            DistanceError::NonIncreasingGrid => write!(f, "grid must be strictly increasing in n"),
        }
    }
}

impl std::error::Error for DistanceError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    TvHist,
    Kolmogorov,
}

impl DistanceMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            DistanceMethod::TvHist => "tv_hist",
            DistanceMethod::Kolmogorov => "kolmogorov",
        }
    }
}

/// One distance estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: DistanceMethod,
    pub sample_size: usize,
    /// Bin count (histogram TV only).
    pub bins: Option<usize>,
}

/// Options for [`tv_hist`]. `bins = None` applies the R^{1/3} rule
/// clamped to [[`MIN_BINS`], [`MAX_BINS`]].
#[derive(Debug, Clone, Copy)]
pub struct TvOptions {
    pub bins: Option<usize>,
    pub range_halfwidth: f64,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl Default for TvOptions {
    fn default() -> Self {
        TvOptions {
            bins: None,
            range_halfwidth: DEFAULT_RANGE_HALFWIDTH,
            bootstrap_resamples: BOOTSTRAP_RESAMPLES,
            bootstrap_seed: 0x0b00_7572,
        }
    }
}

pub fn default_bin_count(r: usize) -> usize {
    let by_rule = (r as f64).cbrt().round() as usize;
    by_rule.clamp(MIN_BINS, MAX_BINS)
}

/// Exact standard-normal mass of each cell: `bins` equal cells over
/// [−hw, hw) followed by one combined two-sided tail cell.
fn cell_probabilities(bins: usize, hw: f64) -> Vec<f64> {
    let width = 2.0 * hw / bins as f64;
    let mut pi = Vec::with_capacity(bins + 1);
    for b in 0..bins {
        let left = -hw + b as f64 * width;
        pi.push(normal::cdf(left + width) - normal::cdf(left));
    }
    pi.push(2.0 * normal::cdf(-hw));
    pi
}

fn cell_counts(sample: &[f64], bins: usize, hw: f64) -> Vec<u64> {
    let width = 2.0 * hw / bins as f64;
    let mut counts = vec![0u64; bins + 1];
    for &x in sample {
        let idx = if x >= -hw && x < hw {
            (((x + hw) / width) as usize).min(bins - 1)
        } else {
            bins
        };
        counts[idx] += 1;
    }
    counts
}

fn tv_from_counts(counts: &[u64], r: f64, pi: &[f64]) -> f64 {
    0.5 * counts
        .iter()
        .zip(pi)
        .map(|(&c, &p)| (c as f64 / r - p).abs())
        .sum::<f64>()
}

/// One multinomial resample of the observed cell counts (conditional
/// binomial scheme; exact).
fn resample_counts(counts: &[u64], rng: &mut ChaCha8Rng) -> Vec<u64> {
    let total: u64 = counts.iter().sum();
    let mut out = vec![0u64; counts.len()];
    let mut rem_trials = total;
    let mut rem_weight = total;
    for (slot, &c) in out.iter_mut().zip(counts) {
        if rem_trials == 0 {
            break;
        }
        if c == 0 {
            continue;
        }
        if c >= rem_weight {
            *slot = rem_trials;
            break;
        }
        let p = (c as f64 / rem_weight as f64).clamp(0.0, 1.0);
        let k = Binomial::new(rem_trials, p)
            .expect("binomial parameters are valid")
            .sample(rng);
        *slot = k;
        rem_trials -= k;
        rem_weight -= c;
    }
    out
}

/// Total-variation distance between the empirical law of `sample` and
/// N(0,1), evaluated on the histogram bin algebra:
/// ½ Σ_cells |p̂ − π| including the combined tail cell. The standard
/// error comes from a seeded multinomial bootstrap of the cell counts,
/// floored at 1/R.
pub fn tv_hist(sample: &[f64], opts: &TvOptions) -> Result<DistanceEstimate, DistanceError> {
    let r = sample.len();
    if r < TV_MIN_SAMPLES {
        return Err(DistanceError::TooFewSamples {
            got: r,
            need: TV_MIN_SAMPLES,
        });
    }
    assert!(
        opts.range_halfwidth.is_finite() && opts.range_halfwidth > 0.0,
        "range_halfwidth must be positive"
    );
    let bins = opts.bins.unwrap_or_else(|| default_bin_count(r));
    assert!(bins >= 2, "need at least 2 bins");
    let hw = opts.range_halfwidth;
    let pi = cell_probabilities(bins, hw);
    let counts = cell_counts(sample, bins, hw);
    let rf = r as f64;
    let value = tv_from_counts(&counts, rf, &pi);

    let mut rng = crate::rng::replicate_rng(opts.bootstrap_seed, 0);
    let mut boot = Vec::with_capacity(opts.bootstrap_resamples);
    for _ in 0..opts.bootstrap_resamples {
        let resampled = resample_counts(&counts, &mut rng);
        boot.push(tv_from_counts(&resampled, rf, &pi));
    }
    let boot_sd = if boot.len() >= 2 {
        crate::util::sample_variance(&boot).sqrt()
    } else {
        0.0
    };
    let stderr = boot_sd.max(1.0 / rf);
    Ok(DistanceEstimate {
        value,
        stderr,
        method: DistanceMethod::TvHist,
        sample_size: r,
        bins: Some(bins),
    })
}

pub fn tv_hist_default(sample: &[f64]) -> Result<DistanceEstimate, DistanceError> {
    tv_hist(sample, &TvOptions::default())
}

/// The TV noise floor at sample size `r`: the estimator applied to `r`
/// exact standard-normal draws with the same options. Rate fits treat
/// values below [`FLOOR_DROP_FACTOR`] × this as indistinguishable from
/// zero.
pub fn tv_calibration_floor(
    r: usize,
    opts: &TvOptions,
    seed: u64,
) -> Result<DistanceEstimate, DistanceError> {
    let mut rng = crate::rng::replicate_rng(seed, 0);
    let draws: Vec<f64> = (0..r).map(|_| rng.sample(StandardNormal)).collect();
    tv_hist(&draws, opts)
}

/// One-sample Kolmogorov statistic sup_t |F̂(t) − Φ(t)| with the
/// asymptotic null standard error 0.87/√R.
pub fn kolmogorov(sample: &[f64]) -> Result<DistanceEstimate, DistanceError> {
    let r = sample.len();
    if r < KS_MIN_SAMPLES {
        return Err(DistanceError::TooFewSamples {
            got: r,
            need: KS_MIN_SAMPLES,
        });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rf = r as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let phi = normal::cdf(x);
        let upper = (i + 1) as f64 / rf - phi;
        let lower = phi - i as f64 / rf;
        d = d.max(upper).max(lower);
    }
    Ok(DistanceEstimate {
        value: d,
        stderr: KS_STDERR_SCALE / rf.sqrt(),
        method: DistanceMethod::Kolmogorov,
        sample_size: r,
        bins: None,
    })
}

/// One grid point for a rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub value: f64,
    pub stderr: f64,
}

/// Weighted log-log fit value ≈ exp(intercept)·n^{slope}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    /// Points the fit used, strictly increasing in n.
    pub grid: Vec<RatePoint>,
    /// Points dropped by the calibration-floor rule.
    pub dropped: Vec<RatePoint>,
    pub slope: f64,
    pub slope_ci: (f64, f64),
    pub intercept: f64,
    /// The floor the drop rule used (0 when none was applied).
    pub floor: f64,
}

/// Weighted least squares of ln(value) on ln(n) with weights
/// (value/stderr)²; the slope CI is ±1.96 standard errors from the
/// regression covariance.
pub fn fit_rate(points: &[RatePoint]) -> Result<RateReport, DistanceError> {
    fit_rate_with_floor(points, 0.0)
}

/// [`fit_rate`] after discarding points with value < [`FLOOR_DROP_FACTOR`]·floor.
pub fn fit_rate_with_floor(points: &[RatePoint], floor: f64) -> Result<RateReport, DistanceError> {
    for w in points.windows(2) {
        if w[1].n <= w[0].n {
            return Err(DistanceError::NonIncreasingGrid);
        }
    }
    for p in points {
        if !(p.value.is_finite() && p.value > 0.0) {
            return Err(DistanceError::NonPositiveValue {
                n: p.n,
                value: p.value,
            });
        }
        assert!(p.stderr.is_finite() && p.stderr >= 0.0, "stderr must be ≥ 0");
    }
    assert!(floor >= 0.0 && floor.is_finite());
    let (grid, dropped): (Vec<RatePoint>, Vec<RatePoint>) = points
        .iter()
        .partition(|p| p.value >= FLOOR_DROP_FACTOR * floor);
    if grid.len() < MIN_FIT_POINTS {
        return Err(DistanceError::TooFewPoints {
            got: grid.len(),
            need: MIN_FIT_POINTS,
        });
    }

    let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in &grid {
        let x = (p.n as f64).ln();
        let y = p.value.ln();
        let rel = (p.stderr / p.value).max(REL_STDERR_FLOOR);
        let w = 1.0 / (rel * rel);
        sw += w;
        swx += w * x;
        swy += w * y;
        swxx += w * x * x;
        swxy += w * x * y;
    }
    let det = sw * swxx - swx * swx;
    assert!(det > 0.0, "distinct grid points give a nonsingular design");
    let slope = (sw * swxy - swx * swy) / det;
    let intercept = (swxx * swy - swx * swxy) / det;
    let slope_sd = (sw / det).sqrt();
    let half = 1.96 * slope_sd;
    Ok(RateReport {
        grid,
        dropped,
        slope,
        slope_ci: (slope - half, slope + half),
        intercept,
        floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_rng;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn normal_draws(r: usize, mean: f64, seed: u64) -> Vec<f64> {
        let mut rng = replicate_rng(seed, 0);
        (0..r)
            .map(|_| mean + rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    #[test]
    fn tv_calibration_scale() {
        let est = tv_calibration_floor(100_000, &TvOptions::default(), 11).expect("enough samples");
        assert!(est.value <= 0.02, "calibration value {}", est.value);
        assert!(est.value > 0.0);
        assert!(est.stderr > 0.0);
        assert_eq!(est.bins, Some(46));
        assert_eq!(est.method, DistanceMethod::TvHist);
    }

    #[test]
    fn tv_mean_shift_matches_analytic_curve() {
        // TV(N(μ,1), N(0,1)) = 2Φ(μ/2) − 1.
        for (mu, seed) in [(0.25, 21u64), (0.5, 22), (1.0, 23)] {
            let sample = normal_draws(100_000, mu, seed);
            let est = tv_hist_default(&sample).expect("enough samples");
            let analytic = 2.0 * normal::cdf(mu / 2.0) - 1.0;
            assert!(
                (est.value - analytic).abs() <= 0.02,
                "mu={mu}: {} vs {analytic}",
                est.value
            );
        }
    }

    #[test]
    fn tv_mean_one_reference_value() {
        let sample = normal_draws(100_000, 1.0, 23);
        let est = tv_hist_default(&sample).expect("enough samples");
        assert_abs_diff_eq!(est.value, 0.38292492254802624, epsilon = 0.02);
    }

    #[test]
    fn tv_constant_sample_collapses() {
        let sample = vec![0.0; 1_000_000];
        let est = tv_hist_default(&sample).expect("enough samples");
        assert_eq!(est.bins, Some(100));
        assert!(est.value >= 0.95, "value {}", est.value);
        // All mass lands in the cell [0, 0.1): value is exactly 1 − π_cell.
        let expected = 1.0 - (normal::cdf(0.1) - normal::cdf(0.0));
        assert_relative_eq!(est.value, expected, max_relative = 1e-12);
        // Degenerate counts make every bootstrap resample identical; the
        // stderr floor 1/R applies.
        assert_eq!(est.stderr, 1e-6);
    }

    #[test]
    fn tv_bin_rule_and_clamps() {
        let small = vec![0.0; 1000];
        assert_eq!(
            tv_hist_default(&small).expect("enough samples").bins,
            Some(MIN_BINS)
        );
        assert_eq!(default_bin_count(100_000), 46);
        assert_eq!(default_bin_count(9_000_000), MAX_BINS);
        let custom = tv_hist(
            &normal_draws(2000, 0.0, 5),
            &TvOptions {
                bins: Some(33),
                ..TvOptions::default()
            },
        )
        .expect("enough samples");
        assert_eq!(custom.bins, Some(33));
    }

    #[test]
    fn tv_rejects_small_samples() {
        let sample = vec![0.0; 999];
        assert!(matches!(
            tv_hist_default(&sample),
            Err(DistanceError::TooFewSamples { got: 999, need: 1000 })
        ));
    }

    #[test]
    fn tv_is_permutation_invariant() {
        let mut sample = normal_draws(5000, 0.3, 7);
        let a = tv_hist_default(&sample).expect("enough samples");
        sample.reverse();
        sample.swap(0, 2500);
        let b = tv_hist_default(&sample).expect("enough samples");
        assert_eq!(a.value, b.value);
        assert_eq!(a.stderr, b.stderr);
    }

    #[test]
    fn tv_mixture_is_convex() {
        // Concatenating equal-size samples averages the empirical cell
        // masses, and the cell-wise L1 distance is convex; with shared
        // bins the mixture value is ≤ the average of the two values.
        let r = 100_000;
        let opts = TvOptions {
            bins: Some(46),
            ..TvOptions::default()
        };
        let shifted = normal_draws(r, 1.0, 31);
        let clean = normal_draws(r, 0.0, 32);
        let mut mixed = shifted.clone();
        mixed.extend_from_slice(&clean);
        let v_shift = tv_hist(&shifted, &opts).expect("enough samples");
        let v_clean = tv_hist(&clean, &opts).expect("enough samples");
        let v_mix = tv_hist(&mixed, &opts).expect("enough samples");
        assert!(v_mix.value <= 0.5 * v_shift.value + 0.5 * v_clean.value + 1e-12);
        // Weaker monotone form: mixing toward the target law at weight ½
        // cannot raise the value above the original plus calibration noise.
        assert!(v_mix.value <= v_shift.value + 0.5 * v_clean.value);
    }

    #[test]
    fn ks_exact_normal_is_small() {
        let sample = normal_draws(100_000, 0.0, 41);
        let est = kolmogorov(&sample).expect("enough samples");
        assert!(est.value <= 0.006, "value {}", est.value);
        assert_relative_eq!(est.stderr, 0.87 / (100_000f64).sqrt(), max_relative = 1e-14);
        assert_eq!(est.bins, None);
    }

    #[test]
    fn ks_mean_shift_reference() {
        // sup_t |Φ(t−1) − Φ(t)| is attained at t = 1/2 and equals
        // Φ(1/2) − Φ(−1/2) = 2Φ(1/2) − 1 ≈ 0.38292: for a pure location
        // shift the optimal set is a half-line, so K coincides with TV.
        let sample = normal_draws(100_000, 1.0, 42);
        let est = kolmogorov(&sample).expect("enough samples");
        let analytic = normal::cdf(0.5) - normal::cdf(-0.5);
        assert_abs_diff_eq!(analytic, 0.3829249225480262, epsilon = 1e-12);
        assert!((est.value - analytic).abs() <= 0.01);
    }

    #[test]
    fn ks_rejects_small_samples() {
        assert!(matches!(
            kolmogorov(&[0.0; 99]),
            Err(DistanceError::TooFewSamples { got: 99, need: 100 })
        ));
    }

    #[test]
    fn ks_tv_discretized_consistency() {
        // As measures K ≤ TV; on the bin algebra allow the 2/bins
        // discretization resolution plus noise.
        let r = 50_000;
        let batteries: Vec<Vec<f64>> = vec![
            normal_draws(r, 0.0, 51),
            normal_draws(r, 0.25, 52),
            normal_draws(r, 0.5, 53),
            normal_draws(r, 1.0, 54),
            {
                let mut m = normal_draws(r / 2, 0.0, 55);
                m.extend(normal_draws(r / 2, 1.0, 56));
                m
            },
            vec![0.0; r],
        ];
        for sample in &batteries {
            let tv = tv_hist_default(sample).expect("enough samples");
            let ks = kolmogorov(sample).expect("enough samples");
            let slack = 2.0 / tv.bins.expect("tv has bins") as f64 + 5.0 * (tv.stderr + ks.stderr);
            assert!(
                ks.value <= tv.value + slack,
                "K {} vs TV {} + {slack}",
                ks.value,
                tv.value
            );
        }
    }

    #[test]
    fn fit_exact_power_law() {
        let points: Vec<RatePoint> = (8..=13)
            .map(|e| {
                let n = 1usize << e;
                RatePoint {
                    n,
                    value: (n as f64).powf(-0.5),
                    stderr: 0.0,
                }
            })
            .collect();
        let fit = fit_rate(&points).expect("valid fit input");
        assert_abs_diff_eq!(fit.slope, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 0.0, epsilon = 1e-10);
        assert!(fit.slope_ci.0 <= fit.slope && fit.slope <= fit.slope_ci.1);
        assert!(fit.dropped.is_empty());
    }

    #[test]
    fn fit_noisy_power_law() {
        let mut rng = replicate_rng(77, 0);
        let points: Vec<RatePoint> = (8..=15)
            .map(|e| {
                let n = 1usize << e;
                let noise: f64 = rng.sample(StandardNormal);
                let value = 3.0 * (n as f64).powf(-0.3) * (0.01 * noise).exp();
                RatePoint {
                    n,
                    value,
                    stderr: 0.01 * value,
                }
            })
            .collect();
        let fit = fit_rate(&points).expect("valid fit input");
        assert!((fit.slope + 0.3).abs() <= 0.02, "slope {}", fit.slope);
        assert!((fit.intercept - 3.0f64.ln()).abs() <= 0.1);
        let width = fit.slope_ci.1 - fit.slope_ci.0;
        assert!(width > 0.0 && width < 0.05, "ci width {width}");
    }

    #[test]
    fn fit_input_validation() {
        let good = |n: usize| RatePoint {
            n,
            value: 0.5,
            stderr: 0.01,
        };
        assert!(matches!(
            fit_rate(&[good(2), good(4), good(8)]),
            Err(DistanceError::TooFewPoints { got: 3, need: 4 })
        ));
        assert!(matches!(
            fit_rate(&[good(2), good(4), good(4), good(8)]),
            Err(DistanceError::NonIncreasingGrid)
        ));
        let mut with_zero = vec![good(2), good(4), good(8), good(16)];
        with_zero[2].value = 0.0;
        assert!(matches!(
            fit_rate(&with_zero),
            Err(DistanceError::NonPositiveValue { n: 8, .. })
        ));
    }

    #[test]
    fn fit_floor_drop_rule() {
        let mk = |n: usize, value: f64| RatePoint {
            n,
            value,
            stderr: 0.1 * value,
        };
        let points = vec![
            mk(256, 0.4),
            mk(512, 0.3),
            mk(1024, 0.2),
            mk(2048, 0.15),
            mk(4096, 0.009),
        ];
        // floor 0.005 → the last point sits below 2×floor and is dropped.
        let fit = fit_rate_with_floor(&points, 0.005).expect("valid fit input");
        assert_eq!(fit.grid.len(), 4);
        assert_eq!(fit.dropped.len(), 1);
        assert_eq!(fit.dropped[0].n, 4096);
        assert_eq!(fit.floor, 0.005);
        // A harsher floor leaves too few points.
        assert!(matches!(
            fit_rate_with_floor(&points, 0.11),
            Err(DistanceError::TooFewPoints { .. })
        ));
    }
}
