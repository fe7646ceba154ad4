//! Deterministic rate bounds (unit constants), the data-driven Stein bound,
//! and the piecewise α-regime rate table.
//!
//! Every bound is a pure function of the covariance partial sums
//! S_p(n) = Σ_{|k|≤n}|ρ(k)|^p and n, evaluated with constant C = 1; the
//! experiments quote fitted constants (ratio of observation to bound shape)
//! rather than absolute levels.

use crate::covariance::CovarianceModel;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundError {
    AlphaOutOfRange { alpha: f64 },
    NegativeVariance { value: f64 },
}

impl fmt::Display for BoundError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundError::AlphaOutOfRange { alpha } => {
                write!(f, "regime rate needs alpha > 1/2, got {alpha}")
            }
            BoundError::NegativeVariance { value } => {
                write!(f, "variance input {value} is negative")
            }
        }
    }
}

impl std::error::Error for BoundError {}

/// Which bound expression a [`BoundReport`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundVariant {
    /// Two-term total-variation rate: n^{−1/2}S_1^{1/2} + n^{−1/2}S_{4/3}^{3/2}.
    Main,
    /// Variance-level target: n^{−1}S_1 + n^{−1}S_{4/3}³ (the square scale of `Main`).
    VarianceTarget,
    /// Single-term rate for even g under first-order smoothness: n^{−1/2}S_1.
    EvenSingle,
    /// Two-term rate with the ℓ^{3/2} sum: n^{−1/2}S_1^{1/2} + n^{−1/2}S_{3/2}².
    OptTwoTerm,
    /// Single ℓ^{3/2} term, the unimprovable shape: n^{−1/2}S_{3/2}².
    OptSingle,
}

impl BoundVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundVariant::Main => "main",
            BoundVariant::VarianceTarget => "variance_target",
            BoundVariant::EvenSingle => "even_single",
            BoundVariant::OptTwoTerm => "opt_two_term",
            BoundVariant::OptSingle => "opt_single",
        }
    }
}

/// One evaluated bound: the two summands (term2 = 0 for single-term
/// variants) and their total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub n: usize,
    pub term1: f64,
    pub term2: f64,
    pub total: f64,
    pub variant: BoundVariant,
}

fn report(n: usize, term1: f64, term2: f64, variant: BoundVariant) -> BoundReport {
    debug_assert!(term1 >= 0.0 && term1.is_finite());
    debug_assert!(term2 >= 0.0 && term2.is_finite());
    BoundReport {
        n,
        term1,
        term2,
        total: term1 + term2,
        variant,
    }
}

/// n^{−1/2}·S_1(n)^{1/2} + n^{−1/2}·S_{4/3}(n)^{3/2}.
pub fn rhs_main(m: &CovarianceModel, n: usize) -> BoundReport {
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let s1 = m.partial_lp_sum(1.0, n);
    let s43 = m.partial_lp_sum(4.0 / 3.0, n);
    report(
        n,
        inv_sqrt_n * s1.sqrt(),
        inv_sqrt_n * s43.powf(1.5),
        BoundVariant::Main,
    )
}

/// n^{−1}·S_1(n) + n^{−1}·S_{4/3}(n)³.
pub fn rhs_variance(m: &CovarianceModel, n: usize) -> BoundReport {
    let inv_n = 1.0 / n as f64;
    let s1 = m.partial_lp_sum(1.0, n);
    let s43 = m.partial_lp_sum(4.0 / 3.0, n);
    report(
        n,
        inv_n * s1,
        inv_n * s43.powi(3),
        BoundVariant::VarianceTarget,
    )
}

/// n^{−1/2}·S_1(n), the single-term variant for even subordination.
pub fn rhs_even_single(m: &CovarianceModel, n: usize) -> BoundReport {
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    report(
        n,
        inv_sqrt_n * m.partial_lp_sum(1.0, n),
        0.0,
        BoundVariant::EvenSingle,
    )
}

/// n^{−1/2}·S_1(n)^{1/2} + n^{−1/2}·S_{3/2}(n)².
pub fn rhs_opt_two_term(m: &CovarianceModel, n: usize) -> BoundReport {
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let s1 = m.partial_lp_sum(1.0, n);
    let s32 = m.partial_lp_sum(1.5, n);
    report(
        n,
        inv_sqrt_n * s1.sqrt(),
        inv_sqrt_n * s32 * s32,
        BoundVariant::OptTwoTerm,
    )
}

/// n^{−1/2}·S_{3/2}(n)².
pub fn rhs_opt_single(m: &CovarianceModel, n: usize) -> BoundReport {
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let s32 = m.partial_lp_sum(1.5, n);
    report(n, inv_sqrt_n * s32 * s32, 0.0, BoundVariant::OptSingle)
}

pub fn all_variants(m: &CovarianceModel, n: usize) -> Vec<BoundReport> {
    vec![
        rhs_main(m, n),
        rhs_variance(m, n),
        rhs_even_single(m, n),
        rhs_opt_two_term(m, n),
        rhs_opt_single(m, n),
    ]
}

/// Piecewise rate for covariances with envelope |ρ(k)| ~ |k|^{−α}:
/// n^{1−2α} on 1/2 < α < 2/3, n^{−α/2} on 2/3 ≤ α < 1,
/// n^{−1/2}(ln n)^{1/2} at α = 1, and n^{−1/2} for α > 1.
pub fn regime_rate(alpha: f64, n: usize) -> Result<f64, BoundError> {
    if !(alpha.is_finite() && alpha > 0.5) {
        return Err(BoundError::AlphaOutOfRange { alpha });
    }
    assert!(n >= 1);
    let nf = n as f64;
    let rate = if alpha < 2.0 / 3.0 {
        nf.powf(1.0 - 2.0 * alpha)
    } else if alpha < 1.0 {
        nf.powf(-alpha / 2.0)
    } else if alpha == 1.0 {
        nf.powf(-0.5) * nf.ln().sqrt()
    } else {
        nf.powf(-0.5)
    };
    Ok(rate)
}

/// The exponent of the regime rate (the α = 1 case reports −1/2; its
/// logarithmic factor is not an exponent).
pub fn regime_exponent(alpha: f64) -> Result<f64, BoundError> {
    if !(alpha.is_finite() && alpha > 0.5) {
        return Err(BoundError::AlphaOutOfRange { alpha });
    }
    Ok(if alpha < 2.0 / 3.0 {
        1.0 - 2.0 * alpha
    } else if alpha < 1.0 {
        -alpha / 2.0
    } else {
        -0.5
    })
}

/// Data-driven total-variation bound (2/σₙ²)·√Var(Φₙ), with a
/// high-confidence companion using the variance estimate plus three
/// standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteinBound {
    pub bound: f64,
    pub bound_hi: f64,
}

pub fn stein_bound(
    var_phi: f64,
    var_phi_stderr: f64,
    sigma_n_sq: f64,
) -> Result<SteinBound, BoundError> {
    if var_phi < 0.0 {
        return Err(BoundError::NegativeVariance { value: var_phi });
    }
    if var_phi_stderr < 0.0 {
        return Err(BoundError::NegativeVariance {
            value: var_phi_stderr,
        });
    }
    assert!(
        sigma_n_sq > 0.0 && sigma_n_sq.is_finite(),
        "sigma_n_sq must be strictly positive"
    );
    let scale = 2.0 / sigma_n_sq;
    Ok(SteinBound {
        bound: scale * var_phi.sqrt(),
        bound_hi: scale * (var_phi + 3.0 * var_phi_stderr).sqrt(),
    })
}
