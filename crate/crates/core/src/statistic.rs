//! The core random quantities of the lab: the normalized partial sum
//! Fₙ = n^{−1/2} Σᵢ g(Xᵢ), its exact variance σₙ², the limit variance σ²,
//! the standardized statistic Yₙ = Fₙ/σₙ, and the inner product
//! Φₙ = (1/n) Σ_{i,j} g′(Xᵢ) g₁(Xⱼ) ρ(i−j) with g₁ the index-shift of g.
//!
//! σₙ² is computed exactly from the coefficient/lag double sum — never
//! estimated — so standardization injects no Monte Carlo noise. Φₙ has two
//! routes: an O(n log n) Toeplitz convolution used everywhere, and an O(n²)
//! double sum kept as its oracle.

use crate::covariance::CovarianceModel;
use crate::fft::ToeplitzConvolver;
use crate::hermite::{cross_covariance, HermiteError, HermiteSeries};
use crate::quadrature::legendre_rule;
use crate::sampler::PathEnsemble;
use crate::util::{jackknife_variance_stderr, mean, pairwise_sum, sample_variance};
use rayon::prelude::*;
use std::fmt;

/// Hard ceiling for adaptive lag sums in the limit variance.
const LAG_SUM_MAX_K: usize = 1 << 22;

/// Dense-matrix cost guard for the fourth-moment oracle.
const WICK_MAX_N: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub enum StatError {
    NotCentered { c0: f64 },
    SigmaNotPositive { value: f64 },
    NotSummable { tail_exponent: f64 },
    TooFewReplicates { got: usize, need: usize },
    Series(HermiteError),
}

impl fmt::Display for StatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatError::NotCentered { c0 } => {
                write!(f, "series is not centered: constant coefficient {c0}")
            }
            StatError::SigmaNotPositive { value } => {
                write!(f, "variance sigma_n^2 = {value} is not strictly positive")
            }
            StatError::NotSummable { tail_exponent } => write!(
                f,
                "lag sums diverge at the series rank (tail exponent {tail_exponent} <= 1)"
            ),
            StatError::TooFewReplicates { got, need } => {
                write!(f, "need at least {need} replicates, got {got}")
            }
            StatError::Series(e) => write!(f, "series error: {e}"),
        }
    }
}

impl std::error::Error for StatError {}

impl From<HermiteError> for StatError {
    fn from(e: HermiteError) -> Self {
        StatError::Series(e)
    }
}

fn require_centered(s: &HermiteSeries) -> Result<(), StatError> {
    let c0 = s.coeff(0);
    if c0.abs() > s.rank_tol().max(1e-12) {
        return Err(StatError::NotCentered { c0 });
    }
    Ok(())
}

/// Evaluate two coefficient vectors at x with one shared Hermite recurrence.
fn eval_two(a: &[f64], b: &[f64], x: f64) -> (f64, f64) {
    let len = a.len().max(b.len());
    let pick = |c: &[f64], q: usize| c.get(q).copied().unwrap_or(0.0);
    let mut va = pick(a, 0);
    let mut vb = pick(b, 0);
    if len == 1 {
        return (va, vb);
    }
    let mut prev = 1.0;
    let mut cur = x;
    va += pick(a, 1) * cur;
    vb += pick(b, 1) * cur;
    for q in 2..len {
        let next = x * cur - (q as f64 - 1.0) * prev;
        prev = cur;
        cur = next;
        va += pick(a, q) * cur;
        vb += pick(b, q) * cur;
    }
    (va, vb)
}

/// Fₙ per replicate: n^{−1/2} Σ_{i} g(X_i).
pub fn compute_f(paths: &PathEnsemble, s: &HermiteSeries) -> Result<Vec<f64>, StatError> {
    require_centered(s)?;
    let norm = 1.0 / (paths.n() as f64).sqrt();
    Ok(paths
        .par_rows()
        .map(|row| {
            let mut acc = 0.0;
            for &x in row {
                acc += s.eval(x);
            }
            acc * norm
        })
        .collect())
}

/// Exact finite-n variance of Fₙ:
/// σₙ² = Σ_{|k|<n} (1 − |k|/n) · Σ_q q!·c_q²·ρ(k)^q.
pub fn sigma_n_sq_exact(s: &HermiteSeries, m: &CovarianceModel, n: usize) -> f64 {
    assert!(n >= 1);
    let mut acc = 0.0;
    for k in (1..n).rev() {
        let weight = 1.0 - k as f64 / n as f64;
        let rho = m.rho(k as i64).clamp(-1.0, 1.0);
        acc += weight * cross_covariance(s, s, rho).expect("clamped rho is in range");
    }
    s.l2_norm_sq() + 2.0 * acc
}

/// ρ extended to real lag x ≥ 1 for the families with a closed formula in
/// |k|; used only for integral tail completion of lag sums.
fn rho_continuous(m: &CovarianceModel, x: f64) -> f64 {
    match m {
        CovarianceModel::PowerLaw { alpha } => (1.0 + x).powf(-alpha),
        CovarianceModel::Fgn { hurst } => {
            let two_h = 2.0 * hurst;
            0.5 * ((x + 1.0).powf(two_h) - 2.0 * x.powf(two_h) + (x - 1.0).abs().powf(two_h))
        }
        _ => unreachable!("tail integrals are only used for power_law and fgn"),
    }
}

/// ∫_{a}^{∞} ρ(x)^q dx for an integrand decaying like x^{−p} (p > 1),
/// via the substitution x = a·(1−u)^{−1/(p−1)}, u ∈ [0, 1), which maps a
/// pure power tail onto a constant — a 64-point Gauss–Legendre rule then
/// resolves the smooth corrections to near machine precision.
fn tail_integral(m: &CovarianceModel, q: i32, a: f64, decay: f64) -> f64 {
    debug_assert!(decay > 1.0);
    let beta = 1.0 / (decay - 1.0);
    let (nodes, weights) = legendre_rule(64);
    let mut acc = 0.0;
    for (&t, &w) in nodes.iter().zip(weights.iter()) {
        let u = 0.5 * (t + 1.0);
        let one_minus = 1.0 - u;
        let x = a * one_minus.powf(-beta);
        let jac = a * beta * one_minus.powf(-beta - 1.0);
        acc += 0.5 * w * rho_continuous(m, x).powi(q) * jac;
    }
    acc
}

/// Σ_{k∈ℤ} ρ(k)^q = 1 + 2·Σ_{k≥1} ρ(k)^q, completed beyond the truncation
/// point by a closed form (geometric/analytic) or a midpoint tail integral,
/// with the truncation point doubled until the result moves less than
/// `abs_tol`.
fn lag_sum(m: &CovarianceModel, q: usize, abs_tol: f64) -> f64 {
    let qi = q as i32;
    match m {
        CovarianceModel::WhiteNoise => 1.0,
        CovarianceModel::Table { values, .. } => {
            let mut acc = 0.0;
            for k in (1..values.len()).rev() {
                acc += values[k].powi(qi);
            }
            1.0 + 2.0 * acc
        }
        CovarianceModel::Ar1 { phi } => {
            let r = phi.powi(qi);
            1.0 + 2.0 * r / (1.0 - r)
        }
        CovarianceModel::Fgn { hurst } if (2.0 * hurst - 1.0).abs() < 1e-12 => {
            // Independent increments: every lag ≥ 1 vanishes identically.
            1.0
        }
        CovarianceModel::PowerLaw { .. } | CovarianceModel::Fgn { .. } => {
            let tail = |k_max: usize| {
                let midpoint = k_max as f64 + 0.5;
                match m {
                    CovarianceModel::PowerLaw { alpha } => {
                        // ∫_{K+1/2}^∞ (1+x)^{−αq} dx in closed form.
                        let e = alpha * q as f64;
                        (1.0 + midpoint).powf(1.0 - e) / (e - 1.0)
                    }
                    CovarianceModel::Fgn { hurst } => {
                        let decay = q as f64 * (2.0 - 2.0 * hurst);
                        tail_integral(m, qi, midpoint, decay)
                    }
                    _ => unreachable!("adaptive branch covers power_law and fgn only"),
                }
            };
            let mut k_max = 1024usize;
            let mut body = 0.0;
            let mut from = 1;
            let mut prev = f64::INFINITY;
            loop {
                let mut add = 0.0;
                for k in (from..=k_max).rev() {
                    add += m.rho(k as i64).powi(qi);
                }
                body += add;
                let total = body + tail(k_max);
                if (total - prev).abs() <= abs_tol.max(1e-14) || k_max >= LAG_SUM_MAX_K {
                    return 1.0 + 2.0 * total;
                }
                prev = total;
                from = k_max + 1;
                k_max *= 2;
            }
        }
    }
}

/// Limit variance σ² = Σ_{q≥d} q!·c_q² · Σ_{k∈ℤ} ρ(k)^q, with every lag sum
/// resolved until its weighted truncation error is below `tail_tol`.
pub fn sigma_sq_limit(
    s: &HermiteSeries,
    m: &CovarianceModel,
    tail_tol: f64,
) -> Result<f64, StatError> {
    require_centered(s)?;
    assert!(tail_tol > 0.0 && tail_tol.is_finite());
    let rank = s.hermite_rank()?;
    let report = m.summability_check(rank as u32);
    if !report.holds {
        return Err(StatError::NotSummable {
            tail_exponent: report.tail_exponent,
        });
    }
    let weights = s.chaos_weights();
    let active: Vec<(usize, f64)> = weights
        .iter()
        .enumerate()
        .skip(rank)
        .filter(|(_, &w)| w > 0.0)
        .map(|(q, &w)| (q, w))
        .collect();
    let count = active.len().max(1) as f64;
    let mut total = 0.0;
    for (q, w) in active {
        total += w * lag_sum(m, q, tail_tol / (w * count));
    }
    Ok(total)
}

/// Φₙ per replicate via the cached Toeplitz convolution (O(n log n) each).
pub fn compute_phi(
    paths: &PathEnsemble,
    s: &HermiteSeries,
    m: &CovarianceModel,
) -> Result<Vec<f64>, StatError> {
    require_centered(s)?;
    let n = paths.n();
    let deriv = s.derivative();
    let shifted = s.shift(1)?;
    let kernel: Vec<f64> = (0..n).map(|k| m.rho(k as i64)).collect();
    let conv = ToeplitzConvolver::new(&kernel);
    let inv_n = 1.0 / n as f64;
    Ok(paths
        .par_rows()
        .map_init(
            || (conv.make_scratch(), vec![0.0; n], vec![0.0; n], vec![0.0; n]),
            |(scratch, a, b, inner), row| {
                for (i, &x) in row.iter().enumerate() {
                    let (da, sb) = eval_two(deriv.coeffs(), shifted.coeffs(), x);
                    a[i] = da;
                    b[i] = sb;
                }
                conv.apply(b, scratch, inner);
                let mut acc = 0.0;
                for i in 0..n {
                    acc += a[i] * inner[i];
                }
                acc * inv_n
            },
        )
        .collect())
}

/// O(n²) double-sum oracle for [`compute_phi`].
pub fn compute_phi_direct(
    paths: &PathEnsemble,
    s: &HermiteSeries,
    m: &CovarianceModel,
) -> Result<Vec<f64>, StatError> {
    require_centered(s)?;
    let n = paths.n();
    let deriv = s.derivative();
    let shifted = s.shift(1)?;
    let inv_n = 1.0 / n as f64;
    Ok(paths
        .par_rows()
        .map(|row| {
            let a: Vec<f64> = row.iter().map(|&x| deriv.eval(x)).collect();
            let b: Vec<f64> = row.iter().map(|&x| shifted.eval(x)).collect();
            let mut acc = 0.0;
            for i in 0..n {
                let mut inner = 0.0;
                for (j, &bj) in b.iter().enumerate() {
                    inner += bj * m.rho(i as i64 - j as i64);
                }
                acc += a[i] * inner;
            }
            acc * inv_n
        })
        .collect())
}

/// Fₙ, Yₙ, Φₙ draws for one (ensemble, series, model) configuration,
/// standardized by the exact σₙ².
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    pub f_values: Vec<f64>,
    pub y_values: Vec<f64>,
    pub phi_values: Vec<f64>,
    pub sigma_n_sq: f64,
    pub n: usize,
    pub series_tag: String,
    pub model_tag: String,
}

impl FunctionalSample {
    pub fn build(
        paths: &PathEnsemble,
        s: &HermiteSeries,
        m: &CovarianceModel,
        series_tag: impl Into<String>,
    ) -> Result<Self, StatError> {
        require_centered(s)?;
        let sigma_n_sq = sigma_n_sq_exact(s, m, paths.n());
        if !(sigma_n_sq > 0.0) {
            return Err(StatError::SigmaNotPositive { value: sigma_n_sq });
        }
        let f_values = compute_f(paths, s)?;
        let inv_sigma = 1.0 / sigma_n_sq.sqrt();
        let y_values: Vec<f64> = f_values.iter().map(|&f| f * inv_sigma).collect();
        let phi_values = compute_phi(paths, s, m)?;
        Ok(FunctionalSample {
            f_values,
            y_values,
            phi_values,
            sigma_n_sq,
            n: paths.n(),
            series_tag: series_tag.into(),
            model_tag: paths.model_tag().to_string(),
        })
    }

    pub fn replicates(&self) -> usize {
        self.f_values.len()
    }

    pub fn mean_phi(&self) -> f64 {
        mean(&self.phi_values)
    }
}

/// Unbiased sample variance of the Φₙ draws with jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarPhiEstimate {
    pub variance: f64,
    pub stderr: f64,
}

pub fn var_phi(sample: &FunctionalSample) -> Result<VarPhiEstimate, StatError> {
    let got = sample.phi_values.len();
    if got < 100 {
        return Err(StatError::TooFewReplicates { got, need: 100 });
    }
    Ok(VarPhiEstimate {
        variance: sample_variance(&sample.phi_values),
        stderr: jackknife_variance_stderr(&sample.phi_values),
    })
}

/// Exact mean and variance of Φₙ for the pure-H₂ series, where Φₙ is the
/// Gaussian quadratic form (2/n)·XᵀΣX and fourth moments close:
/// E = (2/n)·tr(Σ²) and Var = (8/n²)·tr(Σ⁴).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WickPhiMoments {
    pub mean: f64,
    pub variance: f64,
}

pub fn var_phi_wick_h2(m: &CovarianceModel, n: usize) -> WickPhiMoments {
    assert!(n >= 1 && n <= WICK_MAX_N, "dense oracle limited to n <= {WICK_MAX_N}");
    let rho: Vec<f64> = (0..n).map(|k| m.rho(k as i64)).collect();
    // tr(Σ²) = Σ_{ij} ρ(i−j)² over the n×n Toeplitz matrix.
    let mut tr_sq = 0.0;
    for k in (1..n).rev() {
        tr_sq += 2.0 * (n - k) as f64 * rho[k] * rho[k];
    }
    tr_sq += n as f64;
    // Σ² row by row (Toeplitz structure keeps this O(n²) memory-free per
    // row); tr(Σ⁴) is its squared Frobenius norm.
    let tr_4: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                // (Σ²)_{ij} = Σ_k ρ(i−k)·ρ(k−j)
                let mut entry = 0.0;
                for k in 0..n {
                    entry += rho[i.abs_diff(k)] * rho[k.abs_diff(j)];
                }
                acc += entry * entry;
            }
            acc
        })
        .sum();
    WickPhiMoments {
        mean: 2.0 * tr_sq / n as f64,
        variance: 8.0 * tr_4 / (n as f64 * n as f64),
    }
}

/// Mean of Φₙ with jackknife-free standard error of the mean; convenience
/// for the duality diagnostics.
pub fn mean_phi_with_stderr(sample: &FunctionalSample) -> (f64, f64) {
    let m = mean(&sample.phi_values);
    let var = sample_variance(&sample.phi_values);
    (m, (var / sample.phi_values.len() as f64).sqrt())
}

/// Deterministic pairwise mean of the f-draws (diagnostic).
pub fn mean_f(sample: &FunctionalSample) -> f64 {
    pairwise_sum(&sample.f_values) / sample.f_values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::sample;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn h2() -> HermiteSeries {
        HermiteSeries::basis(2)
    }

    #[test]
    fn f_zero_series_is_zero() {
        let m = CovarianceModel::white_noise();
        let paths = sample(&m, 16, 10, 1).expect("samples");
        let zero = HermiteSeries::new(vec![0.0, 0.0]).expect("valid");
        let f = compute_f(&paths, &zero).expect("computes");
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn f_h2_direct_formula_oracle() {
        let m = CovarianceModel::white_noise();
        let paths = sample(&m, 2, 500, 2).expect("samples");
        let f = compute_f(&paths, &h2()).expect("computes");
        for (r, &fv) in f.iter().enumerate() {
            let row = paths.row(r);
            let direct = (row[0] * row[0] + row[1] * row[1] - 2.0) / 2.0_f64.sqrt();
            assert_abs_diff_eq!(fv, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn f_h1_white_noise_is_standard_normal_smoke() {
        let m = CovarianceModel::white_noise();
        let paths = sample(&m, 64, 20_000, 3).expect("samples");
        let f = compute_f(&paths, &HermiteSeries::basis(1)).expect("computes");
        let mu = mean(&f);
        let var = sample_variance(&f);
        assert!(mu.abs() < 3.0 / (f.len() as f64).sqrt() * 1.5, "mean {mu}");
        assert_abs_diff_eq!(var, 1.0, epsilon = 0.05);
    }

    #[test]
    fn non_centered_series_rejected() {
        let m = CovarianceModel::white_noise();
        let paths = sample(&m, 8, 10, 1).expect("samples");
        let s = HermiteSeries::new(vec![1.0, 1.0]).expect("valid");
        assert!(matches!(
            compute_f(&paths, &s),
            Err(StatError::NotCentered { .. })
        ));
    }

    #[test]
    fn sigma_n_sq_reference_values() {
        let white = CovarianceModel::white_noise();
        assert_relative_eq!(sigma_n_sq_exact(&h2(), &white, 64), 2.0, max_relative = 1e-14);
        assert_relative_eq!(sigma_n_sq_exact(&h2(), &white, 1), 2.0, max_relative = 1e-14);
        let ar = CovarianceModel::ar1(0.5).expect("valid");
        // n = 1 sees only the k = 0 term for any model.
        assert_relative_eq!(sigma_n_sq_exact(&h2(), &ar, 1), 2.0, max_relative = 1e-14);
        // n = 2: 2 + 2·(1/2)·2·0.25 = 2.5 by hand.
        assert_relative_eq!(sigma_n_sq_exact(&h2(), &ar, 2), 2.5, max_relative = 1e-14);
        // n → ∞: 2(1+φ²)/(1−φ²) = 10/3.
        assert_abs_diff_eq!(
            sigma_n_sq_exact(&h2(), &ar, 4096),
            10.0 / 3.0,
            epsilon = 1e-3
        );
    }

    #[test]
    fn sigma_limit_reference_values() {
        let white = CovarianceModel::white_noise();
        assert_relative_eq!(
            sigma_sq_limit(&h2(), &white, 1e-10).expect("summable"),
            2.0,
            max_relative = 1e-12
        );
        let ar = CovarianceModel::ar1(0.5).expect("valid");
        assert_relative_eq!(
            sigma_sq_limit(&h2(), &ar, 1e-10).expect("summable"),
            10.0 / 3.0,
            max_relative = 1e-12
        );
        let slow = CovarianceModel::power_law(0.4).expect("valid");
        assert!(matches!(
            sigma_sq_limit(&h2(), &slow, 1e-8),
            Err(StatError::NotSummable { .. })
        ));
    }

    #[test]
    fn sigma_limit_matches_large_n_exact_variance() {
        // σₙ² → σ² as n grows; power_law(1.5) with mixed coefficients.
        let m = CovarianceModel::power_law(1.5).expect("valid");
        let s = HermiteSeries::new(vec![0.0, 0.6, 0.3, 0.1]).expect("valid");
        let limit = sigma_sq_limit(&s, &m, 1e-10).expect("summable");
        // Independent anchor via zeta values: Σ_k (1+k)^{−e} = ζ(e) gives
        // σ² = 0.36(2ζ(1.5)−1) + 0.18(2ζ(3)−1) + 0.06(2ζ(4.5)−1).
        assert_abs_diff_eq!(limit, 1.84021563748238, epsilon = 1e-9);
        let finite = sigma_n_sq_exact(&s, &m, 1 << 14);
        // The Cesàro gap is O(n^{−1/2}) for this decay, ≈ 0.022 at n = 2^14.
        assert_abs_diff_eq!(limit, finite, epsilon = 0.05);
        assert!(finite < limit, "finite-n variance approaches from below");
    }

    #[test]
    fn sigma_limit_adaptive_truncation_is_stable() {
        let m = CovarianceModel::fgn(0.7).expect("valid");
        let coarse = sigma_sq_limit(&h2(), &m, 1e-3).expect("summable");
        let fine = sigma_sq_limit(&h2(), &m, 1e-9).expect("summable");
        assert_relative_eq!(coarse, fine, max_relative = 1e-3);
    }

    #[test]
    fn lag_sum_numeric_tail_matches_closed_form() {
        // The adaptive power_law path uses the closed-form tail; compare a
        // full geometric case where everything is known exactly.
        let ar = CovarianceModel::ar1(-0.6).expect("valid");
        let direct: f64 = 1.0 + 2.0 * (1..200).map(|k| ar.rho(k).powi(3)).sum::<f64>();
        assert_relative_eq!(lag_sum(&ar, 3, 1e-12), direct, max_relative = 1e-12);
        // Power-law lag sum against a long brute-force partial sum plus
        // integral remainder bounds.
        let pl = CovarianceModel::power_law(1.5).expect("valid");
        let brute: f64 = 1.0 + 2.0 * (1..2_000_000u64).map(|k| pl.rho(k as i64).powi(2)).sum::<f64>();
        let fast = lag_sum(&pl, 2, 1e-12);
        assert_relative_eq!(fast, brute, max_relative = 1e-6);
        // fgn numeric tail: H = 0.5 collapses to white noise exactly.
        let fgn_half = CovarianceModel::fgn(0.5).expect("valid");
        assert_relative_eq!(lag_sum(&fgn_half, 2, 1e-12), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn phi_white_h2_closed_form_per_replicate() {
        let m = CovarianceModel::white_noise();
        let paths = sample(&m, 64, 2_000, 4).expect("samples");
        let phi = compute_phi(&paths, &h2(), &m).expect("computes");
        for (r, &p) in phi.iter().enumerate() {
            let row = paths.row(r);
            let direct = 2.0 * row.iter().map(|x| x * x).sum::<f64>() / row.len() as f64;
            assert_relative_eq!(p, direct, max_relative = 1e-10);
        }
        let mu = mean(&phi);
        let se = (sample_variance(&phi) / phi.len() as f64).sqrt();
        assert!((mu - 2.0).abs() < 3.0 * se, "mean {mu}, stderr {se}");
    }

    #[test]
    fn phi_single_point_path() {
        let s = HermiteSeries::new(vec![0.0, 0.5, 0.25]).expect("valid");
        let m = CovarianceModel::ar1(0.5).expect("valid");
        let x = 1.3;
        let paths =
            PathEnsemble::from_raw(vec![x], 1, 1, 0, m.spec_string()).expect("valid");
        let phi = compute_phi(&paths, &s, &m).expect("computes");
        let expected = s.derivative().eval(x) * s.shift(1).expect("rank 1").eval(x);
        assert_relative_eq!(phi[0], expected, max_relative = 1e-12);
    }

    #[test]
    fn phi_fast_path_matches_direct_oracle() {
        let m = CovarianceModel::power_law(0.75).expect("valid");
        let s = HermiteSeries::new(vec![0.0, 0.5, 0.25, 0.1, 0.0, 0.02]).expect("valid");
        let paths = sample(&m, 512, 100, 5).expect("samples");
        let fast = compute_phi(&paths, &s, &m).expect("computes");
        let slow = compute_phi_direct(&paths, &s, &m).expect("computes");
        for (f, s) in fast.iter().zip(slow.iter()) {
            assert_relative_eq!(f, s, max_relative = 1e-9);
        }
    }

    #[test]
    fn var_phi_validation_and_trivial_case() {
        let m = CovarianceModel::white_noise();
        let paths = sample(&m, 8, 50, 6).expect("samples");
        let fs = FunctionalSample::build(&paths, &h2(), &m, "h2").expect("builds");
        assert!(matches!(
            var_phi(&fs),
            Err(StatError::TooFewReplicates { got: 50, need: 100 })
        ));
        let constant = FunctionalSample {
            phi_values: vec![1.5; 200],
            ..fs
        };
        let est = var_phi(&constant).expect("computes");
        assert_abs_diff_eq!(est.variance, 0.0, epsilon = 1e-30);
        assert_abs_diff_eq!(est.stderr, 0.0, epsilon = 1e-30);
    }

    #[test]
    fn wick_oracle_white_noise_closed_form() {
        let m = CovarianceModel::white_noise();
        for n in [4, 64, 256] {
            let w = var_phi_wick_h2(&m, n);
            assert_relative_eq!(w.mean, 2.0, max_relative = 1e-13);
            assert_relative_eq!(w.variance, 8.0 / n as f64, max_relative = 1e-13);
        }
    }

    #[test]
    fn wick_oracle_mean_equals_exact_sigma() {
        let ar = CovarianceModel::ar1(0.5).expect("valid");
        for n in [16, 128] {
            let w = var_phi_wick_h2(&ar, n);
            assert_relative_eq!(
                w.mean,
                sigma_n_sq_exact(&h2(), &ar, n),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn var_phi_matches_wick_oracle_ar1() {
        let ar = CovarianceModel::ar1(0.5).expect("valid");
        let n = 256;
        let paths = sample(&ar, n, 20_000, 7).expect("samples");
        let fs = FunctionalSample::build(&paths, &h2(), &ar, "h2").expect("builds");
        let est = var_phi(&fs).expect("computes");
        let wick = var_phi_wick_h2(&ar, n);
        assert!(
            (est.variance - wick.variance).abs() < 3.0 * est.stderr,
            "MC {} ± {} vs exact {}",
            est.variance,
            est.stderr,
            wick.variance
        );
    }

    #[test]
    fn functional_sample_invariants_smoke() {
        let m = CovarianceModel::ar1(0.5).expect("valid");
        let paths = sample(&m, 128, 20_000, 8).expect("samples");
        let fs = FunctionalSample::build(&paths, &h2(), &m, "h2").expect("builds");
        // y = f / σₙ elementwise.
        let sigma = fs.sigma_n_sq.sqrt();
        for (y, f) in fs.y_values.iter().zip(fs.f_values.iter()) {
            assert_abs_diff_eq!(y * sigma, f, epsilon = 1e-12);
        }
        // Sample variance of f within 3 stderr of exact σₙ² (jackknife se).
        let var_f = sample_variance(&fs.f_values);
        let se = jackknife_variance_stderr(&fs.f_values);
        assert!(
            (var_f - fs.sigma_n_sq).abs() < 3.0 * se,
            "var {var_f} vs {} ± {se}",
            fs.sigma_n_sq
        );
        // Standardized variance near 1.
        let var_y = sample_variance(&fs.y_values);
        assert_abs_diff_eq!(var_y, 1.0, epsilon = 0.05);
        // Duality: mean Φ = σₙ² within 3 stderr.
        let (mu, se_mu) = mean_phi_with_stderr(&fs);
        assert!(
            (mu - fs.sigma_n_sq).abs() < 3.0 * se_mu,
            "mean phi {mu} vs {} ± {se_mu}",
            fs.sigma_n_sq
        );
    }

    #[test]
    fn functional_sample_rejects_zero_variance() {
        let m = CovarianceModel::white_noise();
        let paths = sample(&m, 8, 10, 9).expect("samples");
        let zero = HermiteSeries::new(vec![0.0, 0.0, 0.0]).expect("valid");
        assert!(matches!(
            FunctionalSample::build(&paths, &zero, &m, "zero"),
            Err(StatError::SigmaNotPositive { .. })
        ));
    }
}
