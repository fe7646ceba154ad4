//! Batched experiment drivers shared by the command-line tool and the
//! acceptance suite: collect normalized-functional samples over an
//! n-grid, attach distances, bounds, and the data-driven Stein bound,
//! and fit empirical rates.

use crate::bounds::{self, BoundReport, SteinBound};
use crate::covariance::CovarianceModel;
use crate::distance::{
    self, DistanceError, DistanceEstimate, RatePoint, RateReport, TvOptions,
};
use crate::hermite::HermiteSeries;
use crate::sampler::{self, SamplerError};
use crate::statistic::{self, FunctionalSample, StatError, VarPhiEstimate};
use std::fmt;

/// Per-batch cap on path-matrix storage (doubles); R·n beyond this is
/// split into consecutive global-index ranges with identical output.
pub const MAX_BATCH_DOUBLES: usize = 1 << 24;

#[derive(Debug)]
pub enum RunError {
    Sampler(SamplerError),
    Stat(StatError),
    Distance(DistanceError),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Sampler(e) => write!(f, "sampling failed: {e}"),
            RunError::Stat(e) => write!(f, "statistic failed: {e}"),
            RunError::Distance(e) => write!(f, "distance estimation failed: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<SamplerError> for RunError {
    fn from(e: SamplerError) -> Self {
        RunError::Sampler(e)
    }
}

impl From<StatError> for RunError {
    fn from(e: StatError) -> Self {
        RunError::Stat(e)
    }
}

impl From<DistanceError> for RunError {
    fn from(e: DistanceError) -> Self {
        RunError::Distance(e)
    }
}

/// Deterministic seed derivation for sub-streams (per n, per purpose).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Build the functional sample for (model, series) at size n with R
/// replicates, sampling paths in memory-capped consecutive batches.
/// Output is bit-identical for any positive batch cap.
pub fn collect_run(
    model: &CovarianceModel,
    series: &HermiteSeries,
    series_tag: &str,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<FunctionalSample, RunError> {
    collect_run_with_batch(model, series, series_tag, n, replicates, seed, MAX_BATCH_DOUBLES)
}

pub fn collect_run_with_batch(
    model: &CovarianceModel,
    series: &HermiteSeries,
    series_tag: &str,
    n: usize,
    replicates: usize,
    seed: u64,
    batch_cap_doubles: usize,
) -> Result<FunctionalSample, RunError> {
    assert!(replicates >= 1, "need at least one replicate");
    let batch = (batch_cap_doubles / n.max(1)).max(1).min(replicates);
    let mut merged: Option<FunctionalSample> = None;
    let mut lo = 0u64;
    while lo < replicates as u64 {
        let hi = (lo + batch as u64).min(replicates as u64);
        let paths = sampler::sample_range(model, n, lo..hi, seed)?;
        let part = FunctionalSample::build(&paths, series, model, series_tag)?;
        match &mut merged {
            None => merged = Some(part),
            Some(acc) => {
                debug_assert_eq!(acc.sigma_n_sq, part.sigma_n_sq);
                acc.f_values.extend_from_slice(&part.f_values);
                acc.y_values.extend_from_slice(&part.y_values);
                acc.phi_values.extend_from_slice(&part.phi_values);
            }
        }
        lo = hi;
    }
    Ok(merged.expect("at least one batch"))
}

/// The power-decay exponent α with |ρ(k)| ~ c·|k|^{−α}, for models whose
/// tail is a pure power; None for exponential/compact tails (their rate
/// column uses the fastest regime n^{−1/2}).
pub fn model_alpha(model: &CovarianceModel) -> Option<f64> {
    match model {
        CovarianceModel::PowerLaw { alpha } => Some(*alpha),
        CovarianceModel::Fgn { hurst } => {
            if (2.0 * hurst - 1.0).abs() < 1e-12 {
                None
            } else {
                Some(2.0 - 2.0 * hurst)
            }
        }
        _ => None,
    }
}

/// The regime-table rate for this model at n: piecewise in α when the
/// tail is a power law (None when α ≤ 1/2 puts it outside the table),
/// n^{−1/2} otherwise.
pub fn model_regime_rate(model: &CovarianceModel, n: usize) -> Option<f64> {
    match model_alpha(model) {
        Some(alpha) => bounds::regime_rate(alpha, n).ok(),
        None => Some((n as f64).powf(-0.5)),
    }
}

/// One grid row of a rates run.
#[derive(Debug, Clone)]
pub struct RateRow {
    pub n: usize,
    pub sigma_n_sq: f64,
    pub tv: DistanceEstimate,
    pub ks: DistanceEstimate,
    pub main: BoundReport,
    pub variance_target: BoundReport,
    pub stein: SteinBound,
    pub regime_rate: Option<f64>,
    pub mean_phi: f64,
    pub mean_phi_stderr: f64,
    pub var_phi: VarPhiEstimate,
}

#[derive(Debug, Clone)]
pub struct RatesRun {
    pub rows: Vec<RateRow>,
    /// TV noise floor at this R (exact-normal calibration, same bins).
    pub floor: DistanceEstimate,
    pub fit: Option<RateReport>,
    /// Why the fit is absent, when it is.
    pub fit_error: Option<String>,
}

/// Full distance-and-bounds experiment over an n-grid: per n, sample
/// R replicates, estimate d_TV and the Kolmogorov distance of Yₙ,
/// evaluate the deterministic bounds and the data-driven Stein bound,
/// then fit a rate to the TV values with the calibration-floor rule.
pub fn run_rates(
    model: &CovarianceModel,
    series: &HermiteSeries,
    series_tag: &str,
    n_grid: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<RatesRun, RunError> {
    assert!(!n_grid.is_empty());
    for w in n_grid.windows(2) {
        assert!(w[1] > w[0], "n-grid must be strictly increasing");
    }
    assert!(
        replicates >= distance::TV_MIN_SAMPLES,
        "distance runs need at least {} replicates",
        distance::TV_MIN_SAMPLES
    );

    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let sample = collect_run(
            model,
            series,
            series_tag,
            n,
            replicates,
            mix_seed(seed, n as u64),
        )?;
        let tv_opts = TvOptions {
            bootstrap_seed: mix_seed(seed, (n as u64) | (1 << 40)),
            ..TvOptions::default()
        };
        let tv = distance::tv_hist(&sample.y_values, &tv_opts)?;
        let ks = distance::kolmogorov(&sample.y_values)?;
        let vp = statistic::var_phi(&sample)?;
        let stein = bounds::stein_bound(vp.variance.max(0.0), vp.stderr, sample.sigma_n_sq)
            .expect("nonnegative variance inputs");
        let (mean_phi, mean_phi_stderr) = statistic::mean_phi_with_stderr(&sample);
        rows.push(RateRow {
            n,
            sigma_n_sq: sample.sigma_n_sq,
            tv,
            ks,
            main: bounds::rhs_main(model, n),
            variance_target: bounds::rhs_variance(model, n),
            stein,
            regime_rate: model_regime_rate(model, n),
            mean_phi,
            mean_phi_stderr,
            var_phi: vp,
        });
    }

    let floor = distance::tv_calibration_floor(
        replicates,
        &TvOptions::default(),
        mix_seed(seed, 0xCA11_B7A7),
    )?;
    let points: Vec<RatePoint> = rows
        .iter()
        .map(|r| RatePoint {
            n: r.n,
            value: r.tv.value,
            stderr: r.tv.stderr,
        })
        .collect();
    let (fit, fit_error) = match distance::fit_rate_with_floor(&points, floor.value) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(RatesRun {
        rows,
        floor,
        fit,
        fit_error,
    })
}

/// One grid row of a variance-target run.
#[derive(Debug, Clone)]
pub struct VarPhiRow {
    pub n: usize,
    pub sigma_n_sq: f64,
    pub mean_phi: f64,
    pub mean_phi_stderr: f64,
    pub var_phi: VarPhiEstimate,
    pub rhs_variance: f64,
    /// Var̂(Φₙ) / rhs_variance.
    pub ratio: f64,
}

/// Variance-target experiment: Var(Φₙ) against its deterministic bound
/// over the n-grid.
pub fn run_varphi(
    model: &CovarianceModel,
    series: &HermiteSeries,
    series_tag: &str,
    n_grid: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<Vec<VarPhiRow>, RunError> {
    assert!(!n_grid.is_empty());
    for w in n_grid.windows(2) {
        assert!(w[1] > w[0], "n-grid must be strictly increasing");
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let sample = collect_run(
            model,
            series,
            series_tag,
            n,
            replicates,
            mix_seed(seed, n as u64),
        )?;
        let vp = statistic::var_phi(&sample)?;
        let (mean_phi, mean_phi_stderr) = statistic::mean_phi_with_stderr(&sample);
        let rhs = bounds::rhs_variance(model, n).total;
        rows.push(VarPhiRow {
            n,
            sigma_n_sq: sample.sigma_n_sq,
            mean_phi,
            mean_phi_stderr,
            var_phi: vp,
            rhs_variance: rhs,
            ratio: vp.variance / rhs,
        });
    }
    Ok(rows)
}
