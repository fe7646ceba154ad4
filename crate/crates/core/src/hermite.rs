//! One-dimensional Hermite / Wiener-chaos calculus on coefficient vectors.
//!
//! Probabilists' convention throughout: H_0 = 1, H_1 = x,
//! H_{m+1}(x) = x·H_m(x) − m·H_{m−1}(x), and E[H_p(N) H_q(N)] = q!·δ_{pq}.
//!
//! A [`HermiteSeries`] stores the truncated coefficients (c_0, …, c_Q) of
//! g = Σ c_q H_q and carries the calculus used downstream: numerical
//! projection onto the basis, Hermite rank, the index-shift operator T_k, the
//! derivative, coefficient-wise absolute value A(g), Mehler cross-covariance
//! E[g_a(X) g_b(Y)] for correlated standard Gaussians, the Ornstein–Uhlenbeck
//! semigroup P_t with its generator L and pseudo-inverse L⁻¹, and Sobolev
//! norms over (ℝ, γ).
//!
//! Factorial weights are held as log-gamma values and each q!·a·b·ρ^q term is
//! exponentiated once, so chaos sums stay finite for any truncation order a
//! double can express (q! alone overflows f64 at q = 171).

use crate::quadrature::{GaussianQuadrature, QuadratureSpec};
use std::fmt;
use std::sync::OnceLock;

/// Default truncation order for numerical projections.
pub const DEFAULT_TRUNCATION: usize = 40;

/// Relative factor defining the default zero-coefficient threshold.
const RANK_TOL_RELATIVE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum HermiteError {
    EmptyCoefficients,
    NonFiniteCoefficient { index: usize },
    NonFiniteIntegrand { x: f64 },
    NoRank,
    ShiftExceedsRank { k: usize, rank: usize },
    CorrelationOutOfRange { rho: f64 },
}

impl fmt::Display for HermiteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HermiteError::EmptyCoefficients => write!(f, "coefficient vector is empty"),
            HermiteError::NonFiniteCoefficient { index } => {
                write!(f, "coefficient {index} is not finite")
            }
            HermiteError::NonFiniteIntegrand { x } => {
                write!(f, "integrand returned a non-finite value at x = {x}")
            }
            HermiteError::NoRank => write!(f, "no coefficient with index >= 1 above rank_tol"),
            HermiteError::ShiftExceedsRank { k, rank } => {
                write!(f, "shift order {k} exceeds Hermite rank {rank}")
            }
            HermiteError::CorrelationOutOfRange { rho } => {
                write!(f, "correlation {rho} outside [-1, 1]")
            }
        }
    }
}

impl std::error::Error for HermiteError {}

/// ln(q!) with a cached table for the orders that actually occur.
pub(crate) fn ln_factorial(q: usize) -> f64 {
    const TABLE_LEN: usize = 256;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0; TABLE_LEN];
        for q in 2..TABLE_LEN {
            t[q] = t[q - 1] + (q as f64).ln();
        }
        t
    });
    if q < TABLE_LEN {
        table[q]
    } else {
        statrs::function::gamma::ln_gamma(q as f64 + 1.0)
    }
}

/// Sign-safe q!·a·b·ρ^q, exponentiated once.
fn chaos_term(q: usize, a: f64, b: f64, rho: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    if rho == 0.0 {
        return if q == 0 { a * b } else { 0.0 };
    }
    let mut sign = a.signum() * b.signum();
    if rho < 0.0 && q % 2 == 1 {
        sign = -sign;
    }
    let ln = ln_factorial(q) + a.abs().ln() + b.abs().ln() + q as f64 * rho.abs().ln();
    sign * ln.exp()
}

/// Fill `out[0..=q_max]` with H_0(x), …, H_{q_max}(x).
pub fn hermite_values(x: f64, q_max: usize, out: &mut [f64]) {
    debug_assert!(out.len() > q_max);
    out[0] = 1.0;
    if q_max == 0 {
        return;
    }
    out[1] = x;
    for q in 2..=q_max {
        out[q] = x * out[q - 1] - (q as f64 - 1.0) * out[q - 2];
    }
}

/// H_q(x) by the three-term recurrence.
pub fn hermite_eval(q: usize, x: f64) -> f64 {
    if q == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x;
    for m in 1..q {
        let next = x * cur - m as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Truncated Hermite coefficient vector for g ∈ L²(γ).
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSeries {
    coeffs: Vec<f64>,
    rank_tol: f64,
}

impl HermiteSeries {
    /// Build from coefficients (c_0, …, c_Q); rank_tol defaults to
    /// 1e−8 · max_q |c_q|·√(q!), the scale on which a coefficient is
    /// distinguishable from zero in the L²(γ) norm.
    pub fn new(coeffs: Vec<f64>) -> Result<Self, HermiteError> {
        if coeffs.is_empty() {
            return Err(HermiteError::EmptyCoefficients);
        }
        for (index, c) in coeffs.iter().enumerate() {
            if !c.is_finite() {
                return Err(HermiteError::NonFiniteCoefficient { index });
            }
        }
        let scale = coeffs
            .iter()
            .enumerate()
            .map(|(q, &c)| {
                if c == 0.0 {
                    0.0
                } else {
                    (0.5 * ln_factorial(q) + c.abs().ln()).exp()
                }
            })
            .fold(0.0_f64, f64::max);
        Ok(HermiteSeries {
            coeffs,
            rank_tol: RANK_TOL_RELATIVE * scale,
        })
    }

    /// The pure basis element H_q.
    pub fn basis(q: usize) -> Self {
        let mut coeffs = vec![0.0; q + 1];
        coeffs[q] = 1.0;
        HermiteSeries::new(coeffs).expect("basis coefficients are valid")
    }

    pub fn with_rank_tol(mut self, rank_tol: f64) -> Self {
        assert!(rank_tol >= 0.0 && rank_tol.is_finite());
        self.rank_tol = rank_tol;
        self
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// c_q, zero beyond the truncation order.
    pub fn coeff(&self, q: usize) -> f64 {
        self.coeffs.get(q).copied().unwrap_or(0.0)
    }

    pub fn truncation_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// g(x) via one recurrence pass.
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = self.coeffs[0];
        if self.coeffs.len() == 1 {
            return acc;
        }
        let mut prev = 1.0;
        let mut cur = x;
        acc += self.coeffs[1] * cur;
        for q in 2..self.coeffs.len() {
            let next = x * cur - (q as f64 - 1.0) * prev;
            prev = cur;
            cur = next;
            acc += self.coeffs[q] * cur;
        }
        acc
    }

    /// Smallest q ≥ 1 with |c_q| > rank_tol.
    pub fn hermite_rank(&self) -> Result<usize, HermiteError> {
        for q in 1..self.coeffs.len() {
            if self.coeffs[q].abs() > self.rank_tol {
                return Ok(q);
            }
        }
        Err(HermiteError::NoRank)
    }

    /// Shift operator T_k: the coefficient of H_m becomes the coefficient of
    /// H_{m−k}. Requires k ≤ rank, so only sub-threshold coefficients (and
    /// c_0, which a centered series does not have) get dropped.
    pub fn shift(&self, k: usize) -> Result<Self, HermiteError> {
        if k == 0 {
            return Ok(self.clone());
        }
        let rank = self.hermite_rank()?;
        if k > rank {
            return Err(HermiteError::ShiftExceedsRank { k, rank });
        }
        let coeffs: Vec<f64> = self.coeffs[k..].to_vec();
        Ok(HermiteSeries {
            coeffs,
            rank_tol: self.rank_tol,
        })
    }

    /// g′ in coefficient space: c′_q = (q+1)·c_{q+1}, from H_q′ = q·H_{q−1}.
    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return HermiteSeries {
                coeffs: vec![0.0],
                rank_tol: self.rank_tol,
            };
        }
        let coeffs: Vec<f64> = (1..self.coeffs.len())
            .map(|q| q as f64 * self.coeffs[q])
            .collect();
        HermiteSeries {
            coeffs,
            rank_tol: self.rank_tol,
        }
    }

    /// A(g) = Σ |c_q| H_q.
    pub fn abs_series(&self) -> Self {
        HermiteSeries {
            coeffs: self.coeffs.iter().map(|c| c.abs()).collect(),
            rank_tol: self.rank_tol,
        }
    }

    /// Ornstein–Uhlenbeck semigroup P_t: c_q ↦ e^{−qt} c_q.
    pub fn ou_apply(&self, t: f64) -> Self {
        assert!(t >= 0.0 && t.is_finite(), "OU time must be nonnegative");
        HermiteSeries {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(q, &c)| (-(q as f64) * t).exp() * c)
                .collect(),
            rank_tol: self.rank_tol,
        }
    }

    /// Generator L: c_q ↦ −q·c_q.
    pub fn l_apply(&self) -> Self {
        HermiteSeries {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(q, &c)| -(q as f64) * c)
                .collect(),
            rank_tol: self.rank_tol,
        }
    }

    /// Pseudo-inverse L⁻¹: c_q ↦ −c_q/q for q ≥ 1, constant term dropped.
    pub fn linv_apply(&self) -> Self {
        HermiteSeries {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(q, &c)| if q == 0 { 0.0 } else { -c / q as f64 })
                .collect(),
            rank_tol: self.rank_tol,
        }
    }

    /// (series with c_0 = 0, removed constant).
    pub fn centered(&self) -> (Self, f64) {
        let c0 = self.coeffs[0];
        let mut coeffs = self.coeffs.clone();
        coeffs[0] = 0.0;
        (
            HermiteSeries {
                coeffs,
                rank_tol: self.rank_tol,
            },
            c0,
        )
    }

    /// Chaos weights q!·c_q².
    pub fn chaos_weights(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(q, &c)| {
                if c == 0.0 {
                    0.0
                } else {
                    (ln_factorial(q) + 2.0 * c.abs().ln()).exp()
                }
            })
            .collect()
    }

    /// Centered L²(γ) norm squared Σ_{q≥1} q!·c_q²; same arithmetic path as
    /// `cross_covariance(self, self, 1)`.
    pub fn l2_norm_sq(&self) -> f64 {
        cross_covariance(self, self, 1.0).expect("rho = 1 is in range")
    }

    /// Estimate of the discarded tail mass Σ_{q>Q} q!·c_q², extrapolated
    /// from the decay of the last five nonzero chaos weights. Heuristic
    /// only: returns infinity when the observed decay is too slow to sum,
    /// and 0 for series with fewer than two nonzero weights (polynomials
    /// projected at sufficient order).
    pub fn truncation_tail_estimate(&self) -> f64 {
        let weights = self.chaos_weights();
        let nonzero: Vec<(f64, f64)> = weights
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &w)| w > 0.0)
            .map(|(q, &w)| (q as f64, w))
            .collect();
        if nonzero.len() < 2 {
            return 0.0;
        }
        let tail: Vec<(f64, f64)> = nonzero.iter().rev().take(5).rev().copied().collect();
        // Log-log least squares for the local decay exponent s in w_q ~ q^s.
        let m = tail.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &(q, w) in &tail {
            let lx = q.ln();
            let ly = w.ln();
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        let denom = m * sxx - sx * sx;
        if denom <= 0.0 {
            return f64::INFINITY;
        }
        let s = (m * sxy - sx * sy) / denom;
        if s >= -1.0 {
            return f64::INFINITY;
        }
        let (q_last, w_last) = *tail.last().expect("tail nonempty");
        // Average index gap between consecutive nonzero weights (2 for even
        // or odd functions, 1 for generic series).
        let gap = (tail.last().expect("nonempty").0 - tail[0].0) / (tail.len() as f64 - 1.0);
        // Σ_{q>Q} w_q ≈ w_Q · ∫_Q^∞ (u/Q)^s du / gap = w_Q·Q/(gap·(−s−1)).
        w_last * q_last / (gap.max(1.0) * (-s - 1.0))
    }

    /// Sobolev norm (∫ (|g|^p + Σ_{i≤k} |D^i g|^p) dγ)^{1/p}.
    pub fn sobolev_norm(&self, k: usize, p: f64, spec: &QuadratureSpec) -> f64 {
        assert!(p > 1.0, "Sobolev exponent must exceed 1");
        let mut chain = vec![self.clone()];
        for _ in 0..k {
            chain.push(chain.last().expect("nonempty").derivative());
        }
        let quad = GaussianQuadrature::new(spec);
        let integral = quad.integrate(|x| chain.iter().map(|s| s.eval(x).abs().powf(p)).sum());
        integral.powf(1.0 / p)
    }

    /// L^p(γ) norm of g itself.
    pub fn lp_norm(&self, p: f64, spec: &QuadratureSpec) -> f64 {
        assert!(p >= 1.0);
        let quad = GaussianQuadrature::new(spec);
        quad.integrate(|x| self.eval(x).abs().powf(p)).powf(1.0 / p)
    }
}

/// Project g onto H_0..H_Q: c_q = (1/q!) ∫ g·H_q dγ by composite
/// Gauss–Legendre with the Gaussian weight folded into the integrand.
pub fn project<F: Fn(f64) -> f64>(
    g: F,
    q_max: usize,
    spec: &QuadratureSpec,
) -> Result<HermiteSeries, HermiteError> {
    let quad = GaussianQuadrature::new(spec);
    let mut sums = vec![0.0; q_max + 1];
    let mut h = vec![0.0; q_max + 1];
    for (&x, &w) in quad.nodes().iter().zip(quad.weights().iter()) {
        let gx = g(x);
        if !gx.is_finite() {
            return Err(HermiteError::NonFiniteIntegrand { x });
        }
        hermite_values(x, q_max, &mut h);
        let wg = w * gx;
        for q in 0..=q_max {
            sums[q] += wg * h[q];
        }
    }
    let coeffs: Vec<f64> = sums
        .iter()
        .enumerate()
        .map(|(q, &s)| s * (-ln_factorial(q)).exp())
        .collect();
    HermiteSeries::new(coeffs)
}

/// Mehler cross-covariance Σ_{q≥1} q!·a_q·b_q·ρ^q = Cov(g_a(X), g_b(Y)) for
/// jointly standard Gaussian (X, Y) with correlation ρ. The q = 0 term is
/// excluded (covariance semantics); use [`cross_moment`] for the raw moment.
pub fn cross_covariance(
    a: &HermiteSeries,
    b: &HermiteSeries,
    rho: f64,
) -> Result<f64, HermiteError> {
    if !(rho.is_finite() && rho.abs() <= 1.0) {
        return Err(HermiteError::CorrelationOutOfRange { rho });
    }
    let q_max = a.coeffs.len().min(b.coeffs.len()) - 1;
    let mut acc = 0.0;
    for q in 1..=q_max {
        acc += chaos_term(q, a.coeffs[q], b.coeffs[q], rho);
    }
    Ok(acc)
}

/// Raw mixed moment E[g_a(X) g_b(Y)] = a_0·b_0 + Σ_{q≥1} q!·a_q·b_q·ρ^q.
pub fn cross_moment(a: &HermiteSeries, b: &HermiteSeries, rho: f64) -> Result<f64, HermiteError> {
    Ok(a.coeffs[0] * b.coeffs[0] + cross_covariance(a, b, rho)?)
}
