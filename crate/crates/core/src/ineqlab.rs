//! Direct numerical verification of the supporting inequalities behind
//! the rate analysis: the correlation (Gebelein-type) inequality via
//! Mehler cross-moments plus Monte Carlo, two convolution-sum bounds
//! with brute-force enumeration oracles, the Stein-equation solution
//! with its classical sup bounds, and a vanishing-sequence criterion.

use crate::covariance::CovarianceModel;
use crate::hermite::{self, HermiteSeries};
use crate::normal;
use crate::quadrature::QuadratureSpec;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::Serialize;
use std::fmt;

/// Minimum Monte Carlo replicates for [`gebelein_mc`].
pub const MIN_MC_REPLICATES: usize = 10_000;
/// Largest supported tuple length for the sum lemmas (cost guard).
pub const MAX_TUPLE_LEN: usize = 4;
/// Largest window for the brute-force enumeration oracles.
pub const BRUTE_MAX_WINDOW: usize = 32;
/// Sup-norm ceiling for the Stein solution, √(π/2).
pub const STEIN_SUP_F_BOUND: f64 = 1.2533141373155003;
/// Sup-norm ceiling for its derivative.
pub const STEIN_SUP_FPRIME_BOUND: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub enum IneqError {
    NotCentered { c0: f64 },
    ThetaOutOfRange { theta: f64 },
    ExponentsNotConjugate { p: f64, q: f64 },
    BadVector { detail: String },
    ModelRequired,
    HUnbounded { max_abs: f64 },
}

impl fmt::Display for IneqError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IneqError::NotCentered { c0 } => {
                write!(f, "series must be centered; constant term is {c0}")
            }
            IneqError::ThetaOutOfRange { theta } => {
                write!(f, "correlation {theta} is outside [-1, 1]")
            }
            IneqError::ExponentsNotConjugate { p, q } => {
                write!(f, "exponents p={p}, q={q} are not conjugate (1/p + 1/q must be 1)")
            }
            IneqError::BadVector { detail } => write!(f, "invalid sign vector: {detail}"),
            IneqError::ModelRequired => {
                write!(f, "this check needs a covariance model as its weight source")
            }
            IneqError::HUnbounded { max_abs } => {
                write!(f, "test function must satisfy |h| <= 1; observed {max_abs}")
            }
        }
    }
}

impl std::error::Error for IneqError {}

// ---------------------------------------------------------------------------
// Correlation inequality for subordinated pairs
// ---------------------------------------------------------------------------

/// A correlated pair of centered Hermite observables with conjugate
/// Hölder exponents.
#[derive(Debug, Clone)]
pub struct GebeleinCase {
    a: HermiteSeries,
    b: HermiteSeries,
    theta: f64,
    p: f64,
    q: f64,
}

impl GebeleinCase {
    pub fn new(
        a: HermiteSeries,
        b: HermiteSeries,
        theta: f64,
        p: f64,
        q: f64,
    ) -> Result<Self, IneqError> {
        for s in [&a, &b] {
            let c0 = s.coeff(0);
            if c0.abs() > s.rank_tol().max(1e-12) {
                return Err(IneqError::NotCentered { c0 });
            }
        }
        if !(theta.is_finite() && (-1.0..=1.0).contains(&theta)) {
            return Err(IneqError::ThetaOutOfRange { theta });
        }
        if !(p.is_finite() && q.is_finite() && p > 1.0 && q > 1.0)
            || (1.0 / p + 1.0 / q - 1.0).abs() > 1e-12
        {
            return Err(IneqError::ExponentsNotConjugate { p, q });
        }
        Ok(GebeleinCase { a, b, theta, p, q })
    }

    pub fn a(&self) -> &HermiteSeries {
        &self.a
    }

    pub fn b(&self) -> &HermiteSeries {
        &self.b
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GebeleinReport {
    /// Σ_{q≥1} q!·a_q·b_q·θ^q, the exact covariance of the pair.
    pub cross_moment: f64,
    /// |θ|·‖F₁‖_p·‖F₂‖_q with norms under the standard Gaussian law.
    pub rhs: f64,
    /// Empirical constant |cross_moment| / rhs (0 when both vanish).
    pub ratio: f64,
    /// Whether the inequality holds with unit constant.
    pub holds: bool,
}

/// Exact evaluation: the covariance by Mehler's expansion against the
/// Hölder product of Gaussian L^p norms.
pub fn gebelein_exact(case: &GebeleinCase, spec: &QuadratureSpec) -> GebeleinReport {
    let cross_moment = hermite::cross_covariance(&case.a, &case.b, case.theta)
        .expect("theta validated at construction");
    let rhs = case.theta.abs() * case.a.lp_norm(case.p, spec) * case.b.lp_norm(case.q, spec);
    let ratio = if rhs > 0.0 {
        cross_moment.abs() / rhs
    } else if cross_moment.abs() <= 1e-15 {
        0.0
    } else {
        f64::INFINITY
    };
    let holds = cross_moment.abs() <= rhs * (1.0 + 1e-9) + 1e-12;
    GebeleinReport {
        cross_moment,
        rhs,
        ratio,
        holds,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GebeleinMcReport {
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte Carlo mean of F₁(W)·F₂(θW + √(1−θ²)Ŵ) over independent
/// standard normal pairs, on per-replicate seeded streams (deterministic
/// for any thread count).
pub fn gebelein_mc(case: &GebeleinCase, replicates: usize, seed: u64) -> GebeleinMcReport {
    assert!(
        replicates >= MIN_MC_REPLICATES,
        "need at least {MIN_MC_REPLICATES} replicates"
    );
    let theta = case.theta;
    let comp = (1.0 - theta * theta).max(0.0).sqrt();
    let terms: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = crate::rng::replicate_rng(seed, r);
            let w: f64 = rng.sample(StandardNormal);
            let w_hat: f64 = rng.sample(StandardNormal);
            case.a.eval(w) * case.b.eval(theta * w + comp * w_hat)
        })
        .collect();
    GebeleinMcReport {
        estimate: crate::util::mean(&terms),
        stderr: crate::util::mean_stderr(&terms),
    }
}

// ---------------------------------------------------------------------------
// Convolution-sum bounds
// ---------------------------------------------------------------------------

/// Weight source for the sum bounds: a covariance model (f = |ρ|) or an
/// explicit nonnegative symmetric profile f(|k|) given as values at
/// lags 0, 1, …
#[derive(Debug, Clone)]
pub enum FSource {
    Model(CovarianceModel),
    Explicit(Vec<f64>),
}

impl FSource {
    fn value(&self, k: i64) -> f64 {
        match self {
            FSource::Model(m) => m.rho(k).abs(),
            FSource::Explicit(v) => {
                let idx = k.unsigned_abs() as usize;
                v.get(idx).copied().unwrap_or(0.0)
            }
        }
    }
}

/// One sum-bound instance: an M-tuple window [−n, n]^M and a sign
/// vector v.
#[derive(Debug, Clone)]
pub struct SumLemmaCase {
    pub f_source: FSource,
    pub tuple_len: usize,
    pub v: Vec<i8>,
    pub n: usize,
}

impl SumLemmaCase {
    pub fn new(f_source: FSource, tuple_len: usize, v: Vec<i8>, n: usize) -> Result<Self, IneqError> {
        if tuple_len < 2 {
            return Err(IneqError::BadVector {
                detail: format!("tuple length must be at least 2, got {tuple_len}"),
            });
        }
        if v.len() != tuple_len {
            return Err(IneqError::BadVector {
                detail: format!("sign vector length {} != tuple length {tuple_len}", v.len()),
            });
        }
        if n < 1 {
            return Err(IneqError::BadVector {
                detail: "window must be at least 1".into(),
            });
        }
        if let FSource::Explicit(values) = &f_source {
            if values.is_empty() || values.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(IneqError::BadVector {
                    detail: "explicit profile must be nonempty, finite, and nonnegative".into(),
                });
            }
        }
        Ok(SumLemmaCase {
            f_source,
            tuple_len,
            v,
            n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SumLemmaReport {
    pub lhs: f64,
    pub rhs_unit: f64,
    pub ratio: f64,
}

fn finish_report(lhs: f64, rhs_unit: f64) -> SumLemmaReport {
    let ratio = if rhs_unit > 0.0 {
        lhs / rhs_unit
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    SumLemmaReport {
        lhs,
        rhs_unit,
        ratio,
    }
}

/// Linear convolution via zero-padded FFT.
fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let m = out_len.next_power_of_two();
    let forward = crate::fft::plan_forward(m);
    let inverse = crate::fft::plan_inverse(m);
    let mut fa: Vec<Complex<f64>> = (0..m)
        .map(|i| Complex::new(a.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    let mut fb: Vec<Complex<f64>> = (0..m)
        .map(|i| Complex::new(b.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / m as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Convolve a list of symmetric lag profiles (each indexed −n..n as a
/// slice of length 2n+1); the result is indexed −(list·n)..+(list·n).
fn convolve_all(profiles: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = profiles[0].clone();
    for p in &profiles[1..] {
        acc = convolve(&acc, p);
    }
    acc
}

fn product_alphabet_check(v: &[i8]) -> Result<(), IneqError> {
    if v.iter().any(|&s| s != 1 && s != -1) {
        return Err(IneqError::BadVector {
            detail: "entries must be +1 or -1".into(),
        });
    }
    Ok(())
}

fn weighted_alphabet_check(v: &[i8]) -> Result<(), IneqError> {
    if v.iter().any(|&s| !(-1..=1).contains(&s)) {
        return Err(IneqError::BadVector {
            detail: "entries must be -1, 0, or +1".into(),
        });
    }
    if v.iter().filter(|&&s| s != 0).count() < 2 {
        return Err(IneqError::BadVector {
            detail: "need at least two nonzero entries".into(),
        });
    }
    Ok(())
}

/// Σ_{|k_j|≤n} f(𝐤·𝐯)·Π_j f(k_j) against (Σ_{|k|≤n} f^{1+1/M})^M,
/// computed with an M-fold FFT convolution (f symmetric, so each ±1
/// sign leaves its factor's profile unchanged).
pub fn check_sum_product_bound(case: &SumLemmaCase) -> Result<SumLemmaReport, IneqError> {
    assert!(case.tuple_len <= MAX_TUPLE_LEN, "tuple length capped at {MAX_TUPLE_LEN}");
    product_alphabet_check(&case.v)?;
    let n = case.n as i64;
    let profile: Vec<f64> = (-n..=n).map(|t| case.f_source.value(t)).collect();
    let profiles = vec![profile; case.tuple_len];
    let weights = convolve_all(&profiles);
    let span = case.tuple_len as i64 * n;
    let lhs: f64 = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| case.f_source.value(i as i64 - span) * w)
        .sum();

    let power = 1.0 + 1.0 / case.tuple_len as f64;
    let mut sum = 0.0;
    for k in (1..=n).rev() {
        sum += case.f_source.value(k).powf(power);
    }
    let base = case.f_source.value(0).powf(power) + 2.0 * sum;
    Ok(finish_report(lhs, base.powi(case.tuple_len as i32)))
}

/// Brute-force enumeration oracle for [`check_sum_product_bound`]
/// (window capped at [`BRUTE_MAX_WINDOW`]).
pub fn check_sum_product_bound_brute(case: &SumLemmaCase) -> Result<SumLemmaReport, IneqError> {
    assert!(case.tuple_len <= MAX_TUPLE_LEN);
    assert!(case.n <= BRUTE_MAX_WINDOW, "brute oracle window capped at {BRUTE_MAX_WINDOW}");
    product_alphabet_check(&case.v)?;
    let n = case.n as i64;
    let m = case.tuple_len;
    let mut k = vec![-n; m];
    let mut lhs = 0.0;
    loop {
        let dot: i64 = k.iter().zip(&case.v).map(|(&kj, &vj)| kj * vj as i64).sum();
        let mut term = case.f_source.value(dot);
        for &kj in &k {
            term *= case.f_source.value(kj);
        }
        lhs += term;
        // odometer increment over [−n, n]^M
        let mut pos = 0;
        loop {
            if pos == m {
                break;
            }
            k[pos] += 1;
            if k[pos] <= n {
                break;
            }
            k[pos] = -n;
            pos += 1;
        }
        if pos == m {
            break;
        }
    }
    let power = 1.0 + 1.0 / m as f64;
    let base: f64 = (-n..=n).map(|t| case.f_source.value(t).powf(power)).sum();
    Ok(finish_report(lhs, base.powi(m as i32)))
}

fn weighted_profiles(
    model: &CovarianceModel,
    case: &SumLemmaCase,
) -> (Vec<Vec<f64>>, f64) {
    let n = case.n as i64;
    let mut convolved = Vec::new();
    let mut scalar = 1.0;
    for (j, &vj) in case.v.iter().enumerate() {
        let profile: Vec<f64> = (-n..=n)
            .map(|t| {
                let r = model.rho(t).abs();
                if j == 0 {
                    r * r
                } else {
                    r
                }
            })
            .collect();
        if vj == 0 {
            scalar *= profile.iter().sum::<f64>();
        } else {
            convolved.push(profile);
        }
    }
    (convolved, scalar)
}

/// Σ_{|k_j|≤n} ρ(k₁)²·|ρ(𝐤·𝐯)|·Π_{j≥2}|ρ(k_j)| against S_1(n)^{M−2}.
/// Coordinates with v_j = 0 drop out of 𝐤·𝐯 and factor into scalar lag
/// sums; the rest is an FFT convolution as in the product bound.
pub fn check_sum_weighted_bound(case: &SumLemmaCase) -> Result<SumLemmaReport, IneqError> {
    assert!(case.tuple_len <= MAX_TUPLE_LEN);
    weighted_alphabet_check(&case.v)?;
    let FSource::Model(model) = &case.f_source else {
        return Err(IneqError::ModelRequired);
    };
    let (profiles, scalar) = weighted_profiles(model, case);
    let weights = convolve_all(&profiles);
    let span = (weights.len() as i64 - 1) / 2;
    let conv_sum: f64 = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| model.rho(i as i64 - span).abs() * w)
        .sum();
    let lhs = scalar * conv_sum;
    let rhs_unit = model
        .partial_lp_sum(1.0, case.n)
        .powi(case.tuple_len as i32 - 2);
    Ok(finish_report(lhs, rhs_unit))
}

/// Brute-force enumeration oracle for [`check_sum_weighted_bound`].
pub fn check_sum_weighted_bound_brute(case: &SumLemmaCase) -> Result<SumLemmaReport, IneqError> {
    assert!(case.tuple_len <= MAX_TUPLE_LEN);
    assert!(case.n <= BRUTE_MAX_WINDOW, "brute oracle window capped at {BRUTE_MAX_WINDOW}");
    weighted_alphabet_check(&case.v)?;
    let FSource::Model(model) = &case.f_source else {
        return Err(IneqError::ModelRequired);
    };
    let n = case.n as i64;
    let m = case.tuple_len;
    let mut k = vec![-n; m];
    let mut lhs = 0.0;
    loop {
        let dot: i64 = k.iter().zip(&case.v).map(|(&kj, &vj)| kj * vj as i64).sum();
        let r1 = model.rho(k[0]);
        let mut term = r1 * r1 * model.rho(dot).abs();
        for &kj in &k[1..] {
            term *= model.rho(kj).abs();
        }
        lhs += term;
        let mut pos = 0;
        loop {
            if pos == m {
                break;
            }
            k[pos] += 1;
            if k[pos] <= n {
                break;
            }
            k[pos] = -n;
            pos += 1;
        }
        if pos == m {
            break;
        }
    }
    let rhs_unit = model.partial_lp_sum(1.0, case.n).powi(m as i32 - 2);
    Ok(finish_report(lhs, rhs_unit))
}

// ---------------------------------------------------------------------------
// Stein equation
// ---------------------------------------------------------------------------

/// A bounded test function h with its known discontinuity locations, so
/// quadrature panels can be split there.
pub struct SteinTestFunction {
    pub label: String,
    pub h: Box<dyn Fn(f64) -> f64 + Sync + Send>,
    /// Points where h jumps or kinks; integration panels never straddle them.
    pub breakpoints: Vec<f64>,
}

impl SteinTestFunction {
    pub fn new(
        label: impl Into<String>,
        h: impl Fn(f64) -> f64 + Sync + Send + 'static,
        breakpoints: Vec<f64>,
    ) -> Self {
        SteinTestFunction {
            label: label.into(),
            h: Box::new(h),
            breakpoints,
        }
    }

    /// h = 1 on (−∞, z], 0 beyond.
    pub fn indicator(z: f64) -> Self {
        Self::new(
            format!("indicator(z={z})"),
            move |x| if x <= z { 1.0 } else { 0.0 },
            vec![z],
        )
    }

    pub fn tanh() -> Self {
        Self::new("tanh", f64::tanh, Vec::new())
    }

    /// 1.5·sin(x) clamped to [−1, 1]; kinks where |sin x| = 2/3.
    pub fn clipped_sine() -> Self {
        let a = (2.0f64 / 3.0).asin();
        let mut kinks = Vec::new();
        for k in -5i32..=5 {
            let base = k as f64 * std::f64::consts::PI;
            kinks.push(base + a);
            kinks.push(base - a);
        }
        kinks.retain(|x| x.abs() <= 14.0);
        kinks.sort_by(f64::total_cmp);
        Self::new(
            "clipped_sine",
            |x| (1.5 * x.sin()).clamp(-1.0, 1.0),
            kinks,
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SteinSolutionReport {
    pub f_values: Vec<f64>,
    pub fprime_values: Vec<f64>,
    pub sup_f: f64,
    pub sup_fprime: f64,
    /// Max deviation of a central-difference derivative from the
    /// equation's right-hand side, away from breakpoints.
    pub ode_residual: f64,
    pub h_mean: f64,
}

/// Gauss–Legendre integration of `g` over [a, b] with panels no wider
/// than `max_width`, never crossing a breakpoint.
fn integrate_piecewise<F: Fn(f64) -> f64>(
    g: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    max_width: f64,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    let (nodes, weights) = RULE.get_or_init(|| crate::quadrature::legendre_rule(16));
    let mut edges = vec![a];
    for &bp in breakpoints {
        if bp > a && bp < b {
            edges.push(bp);
        }
    }
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for pair in edges.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if hi - lo <= 1e-14 {
            continue;
        }
        let panels = ((hi - lo) / max_width).ceil() as usize;
        let width = (hi - lo) / panels as f64;
        for p in 0..panels {
            let left = lo + p as f64 * width;
            let mid = left + 0.5 * width;
            let half = 0.5 * width;
            let mut panel_sum = 0.0;
            for (&x, &w) in nodes.iter().zip(weights) {
                panel_sum += w * g(mid + half * x);
            }
            total += panel_sum * half;
        }
    }
    total
}

/// Integration limit T with x·T + T²/2 ≈ 45, so the Gaussian factor is
/// below 3e−20 at the cut.
fn tail_extent(x_abs: f64) -> f64 {
    -x_abs + (x_abs * x_abs + 90.0).sqrt()
}

/// The solution value f_h(x) given E h, evaluated tail-first so the
/// e^{x²/2} prefactor never materializes: for x ≥ 0,
/// f(x) = −∫₀^∞ (h(x+t) − Eh)·e^{−xt−t²/2} dt, and symmetrically from
/// the left for x < 0.
fn stein_f_at<F: Fn(f64) -> f64>(h: &F, h_mean: f64, breakpoints: &[f64], x: f64) -> f64 {
    let t_max = tail_extent(x.abs());
    if x >= 0.0 {
        let bps: Vec<f64> = breakpoints
            .iter()
            .map(|z| z - x)
            .filter(|t| *t > 0.0 && *t < t_max)
            .collect();
        -integrate_piecewise(
            |t| (h(x + t) - h_mean) * (-x * t - 0.5 * t * t).exp(),
            0.0,
            t_max,
            &bps,
            0.5,
        )
    } else {
        let bps: Vec<f64> = breakpoints
            .iter()
            .map(|z| x - z)
            .filter(|t| *t > 0.0 && *t < t_max)
            .collect();
        integrate_piecewise(
            |t| (h(x - t) - h_mean) * (x * t - 0.5 * t * t).exp(),
            0.0,
            t_max,
            &bps,
            0.5,
        )
    }
}

/// Solve f′(x) − x·f(x) = h(x) − E h(N) on the grid and report the sup
/// norms and an ODE residual from central differences (grid points
/// adjacent to breakpoints are excluded from the residual).
pub fn stein_solution(
    tf: &SteinTestFunction,
    x_grid: &[f64],
) -> Result<SteinSolutionReport, IneqError> {
    let h = &tf.h;
    // Boundedness probe: the grid plus a dense sweep of the integration range.
    let mut max_abs = 0.0f64;
    for &x in x_grid {
        max_abs = max_abs.max(h(x).abs());
    }
    let mut x = -12.0;
    while x <= 12.0 {
        max_abs = max_abs.max(h(x).abs());
        x += 0.01;
    }
    if max_abs > 1.0 + 1e-9 {
        return Err(IneqError::HUnbounded { max_abs });
    }

    let h_mean = integrate_piecewise(
        |y| h(y) * normal::pdf(y),
        -12.0,
        12.0,
        &tf.breakpoints,
        0.5,
    );

    let f_values: Vec<f64> = x_grid
        .par_iter()
        .map(|&x| stein_f_at(h, h_mean, &tf.breakpoints, x))
        .collect();
    let fprime_values: Vec<f64> = x_grid
        .iter()
        .zip(&f_values)
        .map(|(&x, &f)| x * f + h(x) - h_mean)
        .collect();
    let sup_f = f_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup_fprime = fprime_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let delta = 1e-5;
    let ode_residual = x_grid
        .par_iter()
        .zip(&f_values)
        .filter(|(&x, _)| {
            tf.breakpoints
                .iter()
                .all(|z| (x - z).abs() > 10.0 * delta)
        })
        .map(|(&x, &f)| {
            let fp_numeric = (stein_f_at(h, h_mean, &tf.breakpoints, x + delta)
                - stein_f_at(h, h_mean, &tf.breakpoints, x - delta))
                / (2.0 * delta);
            (fp_numeric - (x * f + h(x) - h_mean)).abs()
        })
        .reduce(|| 0.0, f64::max);

    Ok(SteinSolutionReport {
        f_values,
        fprime_values,
        sup_f,
        sup_fprime,
        ode_residual,
        h_mean,
    })
}

/// Closed-form solution for h = indicator(−∞, z]:
/// f(x) = √(2π)·e^{x²/2}·Φ(x∧z)·(1 − Φ(x∨z)).
pub fn stein_indicator_solution(z: f64, x: f64) -> f64 {
    assert!(x.abs() <= 30.0, "closed form evaluated only on moderate x");
    let lo = x.min(z);
    let hi = x.max(z);
    (2.0 * std::f64::consts::PI).sqrt()
        * (0.5 * x * x).exp()
        * normal::cdf(lo)
        * normal::sf(hi)
}

// ---------------------------------------------------------------------------
// Vanishing sequences
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct VanishingReport {
    /// (n, Tₙ) along the grid, Tₙ = n^{−γ}·(Σ_{|k|<n}|ρ(k)|^α)^β.
    pub t_values: Vec<(usize, f64)>,
    /// Whether the sufficient decay condition (2−α)/2 ≤ γ/β holds.
    pub condition_holds: bool,
}

pub fn vanishing_sequence(
    m: &CovarianceModel,
    alpha: f64,
    beta: f64,
    gamma_exp: f64,
    n_grid: &[usize],
) -> VanishingReport {
    assert!(alpha > 0.0 && alpha < 2.0, "alpha must lie in (0, 2)");
    assert!(beta > 0.0 && gamma_exp > 0.0);
    assert!(!n_grid.is_empty());
    for w in n_grid.windows(2) {
        assert!(w[1] > w[0], "grid must be strictly increasing");
    }
    assert!(n_grid[0] >= 1);
    assert!(
        m.summability_check(2).holds,
        "the squared lag sums must be finite"
    );
    let t_values = n_grid
        .iter()
        .map(|&n| {
            let inner = m.partial_lp_sum(alpha, n - 1);
            (n, (n as f64).powf(-gamma_exp) * inner.powf(beta))
        })
        .collect();
    VanishingReport {
        t_values,
        condition_holds: (2.0 - alpha) / 2.0 <= gamma_exp / beta + 1e-12,
    }
}
