//! Named verification suites: structured pass/fail batteries over the
//! inequality lab, the covariance log-convexity check, and the path
//! sampler. Each suite returns a serializable report; the command-line
//! tool renders them as JSON and the acceptance tests assert on them.

use crate::covariance::CovarianceModel;
use crate::experiment::mix_seed;
use crate::hermite::{self, HermiteSeries};
use crate::ineqlab::{
    self, FSource, GebeleinCase, SteinTestFunction, SumLemmaCase,
};
use crate::quadrature::QuadratureSpec;
use crate::sampler::{self, PathEnsemble};
use crate::util;
use serde::Serialize;

const GEBELEIN_REPLICATES: usize = 100_000;
const SAMPLER_FIDELITY_REPLICATES: usize = 100_000;
const SAMPLER_CROSS_REPLICATES: usize = 20_000;
const SAMPLER_N: usize = 256;
const SAMPLER_LAG_MAX: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub cases: Vec<CaseResult>,
}

impl SuiteReport {
    fn new(suite: &str, cases: Vec<CaseResult>) -> Self {
        let passed = cases.iter().all(|c| c.passed);
        SuiteReport {
            suite: suite.to_string(),
            passed,
            cases,
        }
    }
}

fn case(label: impl Into<String>, passed: bool, detail: String) -> CaseResult {
    CaseResult {
        label: label.into(),
        passed,
        detail,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteKind {
    Gebelein,
    Sums,
    Stein,
    Vanishing,
    Logconvex,
    Sampler,
}

impl SuiteKind {
    pub const ALL: [SuiteKind; 6] = [
        SuiteKind::Gebelein,
        SuiteKind::Sums,
        SuiteKind::Stein,
        SuiteKind::Vanishing,
        SuiteKind::Logconvex,
        SuiteKind::Sampler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuiteKind::Gebelein => "gebelein",
            SuiteKind::Sums => "sums",
            SuiteKind::Stein => "stein",
            SuiteKind::Vanishing => "vanishing",
            SuiteKind::Logconvex => "logconvex",
            SuiteKind::Sampler => "sampler",
        }
    }

    pub fn from_name(s: &str) -> Option<SuiteKind> {
        SuiteKind::ALL.iter().copied().find(|k| k.name() == s)
    }
}

pub fn run_suite(kind: SuiteKind, seed: u64) -> SuiteReport {
    match kind {
        SuiteKind::Gebelein => gebelein_suite(seed),
        SuiteKind::Sums => sums_suite(),
        SuiteKind::Stein => stein_suite(),
        SuiteKind::Vanishing => vanishing_suite(),
        SuiteKind::Logconvex => logconvex_suite(),
        SuiteKind::Sampler => sampler_suite(seed),
    }
}

pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    SuiteKind::ALL
        .iter()
        .map(|&k| run_suite(k, seed))
        .collect()
}

// ---------------------------------------------------------------------------
// Gebelein
// ---------------------------------------------------------------------------

fn gebelein_series() -> Vec<(&'static str, HermiteSeries)> {
    let spec = QuadratureSpec::default();
    let absx = hermite::project(|x: f64| x.abs(), 20, &spec)
        .expect("projection converges")
        .centered()
        .0;
    vec![
        ("h1", HermiteSeries::basis(1)),
        ("h2", HermiteSeries::basis(2)),
        ("absx_centered", absx),
    ]
}

/// Exact-vs-MC agreement at 3 stderr over the full θ × (a, b) grid,
/// the unit-constant inequality at p = q = 2, and the linear-in-θ
/// envelope for coefficient-aligned pairs.
fn gebelein_suite(seed: u64) -> SuiteReport {
    let spec = QuadratureSpec::default();
    let series = gebelein_series();
    let thetas = [-0.9, -0.5, 0.0, 0.3, 0.7, 1.0];
    let mut cases = Vec::new();
    let mut stream = 0u64;
    for (name_a, a) in &series {
        for (name_b, b) in &series {
            for &theta in &thetas {
                let gc = GebeleinCase::new(a.clone(), b.clone(), theta, 2.0, 2.0)
                    .expect("valid case");
                let exact = ineqlab::gebelein_exact(&gc, &spec);
                let mc = ineqlab::gebelein_mc(
                    &gc,
                    GEBELEIN_REPLICATES,
                    mix_seed(seed, 0x9EB0 + stream),
                );
                stream += 1;
                let gap = (mc.estimate - exact.cross_moment).abs();
                let ok = gap <= 3.0 * mc.stderr && exact.holds;
                cases.push(case(
                    format!("mc_vs_exact[{name_a},{name_b},theta={theta}]"),
                    ok,
                    format!(
                        "exact {:.6e}, mc {:.6e} ± {:.2e}, rhs {:.6e}",
                        exact.cross_moment, mc.estimate, mc.stderr, exact.rhs
                    ),
                ));
            }
            // Envelope |cm(θ)| ≤ θ·cm(1) needs all a_q·b_q ≥ 0.
            let aligned = a
                .coeffs()
                .iter()
                .zip(b.coeffs())
                .all(|(&ca, &cb)| ca * cb >= 0.0);
            if aligned {
                let at_one = hermite::cross_covariance(a, b, 1.0).expect("theta in range");
                let ok = thetas.iter().filter(|t| **t != 0.0).all(|&theta| {
                    let cm = hermite::cross_covariance(a, b, theta).expect("theta in range");
                    cm.abs() <= theta.abs() * at_one + 1e-12
                });
                cases.push(case(
                    format!("linear_envelope[{name_a},{name_b}]"),
                    ok,
                    format!("cross-moment at theta=1: {at_one:.6e}"),
                ));
            }
        }
    }
    SuiteReport::new("gebelein", cases)
}

// ---------------------------------------------------------------------------
// Sum lemmas
// ---------------------------------------------------------------------------

/// Convolution path vs enumeration oracle (exact on small windows),
/// the frozen small-case values, and ratio boundedness across n-grids.
fn sums_suite() -> SuiteReport {
    let mut cases = Vec::new();

    // Frozen small cases: product form.
    let point = SumLemmaCase::new(FSource::Explicit(vec![1.0]), 2, vec![1, 1], 1)
        .expect("valid");
    let r = ineqlab::check_sum_product_bound(&point).expect("in range");
    cases.push(case(
        "product_point_mass",
        (r.lhs - 1.0).abs() <= 1e-12 && (r.rhs_unit - 1.0).abs() <= 1e-12,
        format!("lhs {} rhs {}", r.lhs, r.rhs_unit),
    ));
    let window = SumLemmaCase::new(FSource::Explicit(vec![1.0, 1.0]), 2, vec![1, 1], 1)
        .expect("valid");
    let r = ineqlab::check_sum_product_bound(&window).expect("in range");
    cases.push(case(
        "product_window_7_of_9",
        (r.lhs - 7.0).abs() <= 1e-12 && (r.rhs_unit - 9.0).abs() <= 1e-12,
        format!("lhs {} rhs {}", r.lhs, r.rhs_unit),
    ));

    // Frozen small case: weighted form on white noise (only k = 0 lives).
    let white = SumLemmaCase::new(
        FSource::Model(CovarianceModel::white_noise()),
        3,
        vec![1, 1, 1],
        4,
    )
    .expect("valid");
    let r = ineqlab::check_sum_weighted_bound(&white).expect("in range");
    cases.push(case(
        "weighted_white_unit",
        (r.lhs - 1.0).abs() <= 1e-12 && (r.rhs_unit - 1.0).abs() <= 1e-12,
        format!("lhs {} rhs {}", r.lhs, r.rhs_unit),
    ));

    // Oracle agreement on every window the enumeration can afford.
    let model = CovarianceModel::power_law(0.75).expect("valid");
    let oracle_specs: [(usize, Vec<i8>); 5] = [
        (2, vec![1, 1]),
        (2, vec![1, -1]),
        (3, vec![1, -1, 1]),
        (3, vec![1, 1, 0]),
        (4, vec![1, 1, -1, 0]),
    ];
    for (m, v) in &oracle_specs {
        let sc = SumLemmaCase::new(FSource::Model(model.clone()), *m, v.clone(), 32)
            .expect("valid");
        let has_zero = v.iter().any(|&s| s == 0);
        let (fast, brute, which) = if has_zero {
            (
                ineqlab::check_sum_weighted_bound(&sc).expect("in range"),
                ineqlab::check_sum_weighted_bound_brute(&sc).expect("in range"),
                "weighted",
            )
        } else {
            (
                ineqlab::check_sum_product_bound(&sc).expect("in range"),
                ineqlab::check_sum_product_bound_brute(&sc).expect("in range"),
                "product",
            )
        };
        let rel = (fast.lhs - brute.lhs).abs() / brute.lhs.max(1e-300);
        cases.push(case(
            format!("oracle_{which}[M={m},v={v:?}]"),
            rel <= 1e-9,
            format!("conv {:.12e} vs brute {:.12e}", fast.lhs, brute.lhs),
        ));
    }

    // Ratio boundedness over the grid: cap = 3 × ratio at the smallest n.
    for (label, maker) in [
        (
            "product_power_law_grid",
            Box::new(|n: usize| {
                SumLemmaCase::new(FSource::Model(model.clone()), 3, vec![1, 1, 1], n)
                    .expect("valid")
            }) as Box<dyn Fn(usize) -> SumLemmaCase>,
        ),
        (
            "weighted_power_law_grid",
            Box::new(|n: usize| {
                SumLemmaCase::new(FSource::Model(model.clone()), 3, vec![1, 1, 1], n)
                    .expect("valid")
            }),
        ),
    ] {
        let weighted = label.starts_with("weighted");
        let ratios: Vec<f64> = (6..=11)
            .map(|e| {
                let sc = maker(1usize << e);
                let rep = if weighted {
                    ineqlab::check_sum_weighted_bound(&sc).expect("in range")
                } else {
                    ineqlab::check_sum_product_bound(&sc).expect("in range")
                };
                rep.ratio
            })
            .collect();
        let cap = 3.0 * ratios[0];
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        cases.push(case(
            label,
            max <= cap && max / min <= 3.0,
            format!("ratios {ratios:?}, cap {cap:.4}"),
        ));
    }

    // ar1 weighted frozen check: finite ratio, modest size.
    let ar = SumLemmaCase::new(
        FSource::Model(CovarianceModel::ar1(0.5).expect("valid")),
        3,
        vec![1, 1, 1],
        64,
    )
    .expect("valid");
    let r = ineqlab::check_sum_weighted_bound(&ar).expect("in range");
    cases.push(case(
        "weighted_ar1",
        r.ratio.is_finite() && r.ratio <= 10.0,
        format!("lhs {:.6e} rhs {:.6e} ratio {:.4}", r.lhs, r.rhs_unit, r.ratio),
    ));

    SuiteReport::new("sums", cases)
}

// ---------------------------------------------------------------------------
// Stein equation
// ---------------------------------------------------------------------------

fn stein_grid() -> Vec<f64> {
    let mut g = Vec::new();
    let mut x = -6.0;
    while x <= 6.0 + 1e-12 {
        g.push(x);
        x += 0.02;
    }
    g
}

/// Solution bounds sup|f| ≤ √(π/2), sup|f′| ≤ 2, the closed-form
/// indicator cross-check, and the equation residual.
fn stein_suite() -> SuiteReport {
    let grid = stein_grid();
    let sup_f_cap = (std::f64::consts::PI / 2.0).sqrt() + 1e-9;
    let sup_fp_cap = 2.0 + 1e-6;
    let mut cases = Vec::new();

    let mut battery: Vec<(String, SteinTestFunction)> = [-2.0, -1.0, 0.0, 1.0, 2.0]
        .iter()
        .map(|&z| (format!("indicator[z={z}]"), SteinTestFunction::indicator(z)))
        .collect();
    battery.push(("tanh".to_string(), SteinTestFunction::tanh()));
    battery.push(("clipped_sine".to_string(), SteinTestFunction::clipped_sine()));

    for (name, tf) in &battery {
        let rep = ineqlab::stein_solution(tf, &grid).expect("bounded test function");
        let ok = rep.sup_f <= sup_f_cap && rep.sup_fprime <= sup_fp_cap;
        cases.push(case(
            format!("bounds[{name}]"),
            ok,
            format!(
                "sup|f| {:.6} (cap {:.6}), sup|f'| {:.6} (cap 2), residual {:.2e}",
                rep.sup_f, sup_f_cap, rep.sup_fprime, rep.ode_residual
            ),
        ));
    }

    // Residual on the indicator and smooth cases.
    for name in ["indicator[z=1]", "tanh"] {
        let tf = if name == "tanh" {
            SteinTestFunction::tanh()
        } else {
            SteinTestFunction::indicator(1.0)
        };
        let rep = ineqlab::stein_solution(&tf, &grid).expect("bounded test function");
        cases.push(case(
            format!("ode_residual[{name}]"),
            rep.ode_residual <= 1e-6,
            format!("residual {:.2e}", rep.ode_residual),
        ));
    }

    // Closed-form indicator agreement and the z = 0 peak value.
    let tf = SteinTestFunction::indicator(0.0);
    let rep = ineqlab::stein_solution(&tf, &grid).expect("bounded test function");
    let max_gap = grid
        .iter()
        .zip(&rep.f_values)
        .map(|(&x, &f)| (f - ineqlab::stein_indicator_solution(0.0, x)).abs())
        .fold(0.0f64, f64::max);
    let peak = (2.0 * std::f64::consts::PI).sqrt() / 4.0;
    cases.push(case(
        "indicator_closed_form",
        max_gap <= 1e-8 && (rep.sup_f - peak).abs() <= 1e-9,
        format!("max gap {:.2e}, sup|f| {:.10} vs peak {:.10}", max_gap, rep.sup_f, peak),
    ));

    SuiteReport::new("stein", cases)
}

// ---------------------------------------------------------------------------
// Vanishing sequences
// ---------------------------------------------------------------------------

/// The two rate-bound parameter triples: condition arithmetic, tail
/// monotonicity, and overall decrease on a dyadic grid.
fn vanishing_suite() -> SuiteReport {
    let grid: Vec<usize> = (5..=14).map(|e| 1usize << e).collect();
    let triples = [(1.0, 0.5, 0.5), (4.0 / 3.0, 1.5, 0.5)];
    let models = [
        ("white_noise", CovarianceModel::white_noise()),
        ("ar1(0.5)", CovarianceModel::ar1(0.5).expect("valid")),
        ("power_law(0.75)", CovarianceModel::power_law(0.75).expect("valid")),
    ];
    let mut cases = Vec::new();
    for (mname, model) in &models {
        for &(alpha, beta, gamma) in &triples {
            let rep = ineqlab::vanishing_sequence(model, alpha, beta, gamma, &grid);
            let first = rep.t_values.first().expect("nonempty grid").1;
            let last = rep.t_values.last().expect("nonempty grid").1;
            let tail_monotone = rep
                .t_values
                .windows(2)
                .skip(rep.t_values.len() / 2)
                .all(|w| w[1].1 <= w[0].1 + 1e-15);
            let ok = rep.condition_holds && last < first && tail_monotone;
            cases.push(case(
                format!("decay[{mname},alpha={alpha:.4},beta={beta},gamma={gamma}]"),
                ok,
                format!(
                    "T first {:.6e}, last {:.6e}, condition {}",
                    first, last, rep.condition_holds
                ),
            ));
        }
    }
    // White noise: Tₙ = n^{−γ} exactly.
    let rep = ineqlab::vanishing_sequence(
        &CovarianceModel::white_noise(),
        1.0,
        0.5,
        0.5,
        &grid,
    );
    let exact = rep
        .t_values
        .iter()
        .all(|&(n, t)| (t - (n as f64).powf(-0.5)).abs() <= 1e-12);
    cases.push(case(
        "white_noise_exact_power",
        exact,
        "T_n = n^{-1/2} on the grid".to_string(),
    ));
    SuiteReport::new("vanishing", cases)
}

// ---------------------------------------------------------------------------
// Log-convexity
// ---------------------------------------------------------------------------

/// S_{4/3}^{3/4} ≤ S_1^{1/2}·S_2^{1/4} exactly on the model battery.
fn logconvex_suite() -> SuiteReport {
    let models = [
        ("white_noise", CovarianceModel::white_noise()),
        ("ar1(0.5)", CovarianceModel::ar1(0.5).expect("valid")),
        ("ar1(-0.7)", CovarianceModel::ar1(-0.7).expect("valid")),
        ("power_law(0.6)", CovarianceModel::power_law(0.6).expect("valid")),
        ("power_law(0.75)", CovarianceModel::power_law(0.75).expect("valid")),
        ("power_law(1.5)", CovarianceModel::power_law(1.5).expect("valid")),
        ("fgn(0.7)", CovarianceModel::fgn(0.7).expect("valid")),
    ];
    let mut cases = Vec::new();
    for (name, model) in &models {
        let mut all_hold = true;
        let mut worst = f64::MIN;
        for e in 4..=14 {
            let rep = model.logconvexity_check(1usize << e);
            all_hold &= rep.holds;
            worst = worst.max(rep.lhs / rep.rhs);
        }
        cases.push(case(
            format!("logconvex[{name}]"),
            all_hold,
            format!("max lhs/rhs over n-grid: {worst:.12}"),
        ));
    }
    SuiteReport::new("logconvex", cases)
}

// ---------------------------------------------------------------------------
// Sampler fidelity
// ---------------------------------------------------------------------------

/// Per-replicate lag-k means and their stderr (replicate-level CLT).
fn lag_profile(paths: &PathEnsemble, k_max: usize) -> Vec<(f64, f64)> {
    let n = paths.n();
    (0..=k_max)
        .map(|k| {
            let per_rep: Vec<f64> = paths
                .rows()
                .map(|row| {
                    let mut acc = 0.0;
                    for i in 0..n - k {
                        acc += row[i] * row[i + k];
                    }
                    acc / (n - k) as f64
                })
                .collect();
            (util::mean(&per_rep), util::mean_stderr(&per_rep))
        })
        .collect()
}

fn sampler_models() -> Vec<(&'static str, CovarianceModel)> {
    vec![
        ("ar1(0.5)", CovarianceModel::ar1(0.5).expect("valid")),
        ("power_law(0.75)", CovarianceModel::power_law(0.75).expect("valid")),
        ("fgn(0.7)", CovarianceModel::fgn(0.7).expect("valid")),
        ("white_noise", CovarianceModel::white_noise()),
    ]
}

/// Empirical-covariance fidelity at n = 256, the circulant-vs-Cholesky
/// cross-check within joint MC error, and bitwise thread invariance.
fn sampler_suite(seed: u64) -> SuiteReport {
    let mut cases = Vec::new();
    for (i, (name, model)) in sampler_models().iter().enumerate() {
        let fid_seed = mix_seed(seed, 0x5A3F + i as u64);
        let paths = sampler::sample(model, SAMPLER_N, SAMPLER_FIDELITY_REPLICATES, fid_seed)
            .expect("sampling succeeds");
        let rho_hat = paths.empirical_rho(SAMPLER_LAG_MAX);
        let max_err = rho_hat
            .iter()
            .enumerate()
            .map(|(k, &r)| (r - model.rho(k as i64)).abs())
            .fold(0.0f64, f64::max);
        cases.push(case(
            format!("fidelity[{name}]"),
            max_err <= 0.01,
            format!("max lag-error {max_err:.5} over k <= {SAMPLER_LAG_MAX}"),
        ));

        // Circulant embedding vs dense Cholesky: independent ensembles,
        // per-lag agreement within 3.5 joint standard errors (joint over
        // the 21 simultaneous lags).
        let cross_seed = mix_seed(seed, 0xC0_1D + i as u64);
        let fft = sampler::sample(model, SAMPLER_N, SAMPLER_CROSS_REPLICATES, cross_seed)
            .expect("sampling succeeds");
        let chol = sampler::chol_sample(
            model,
            SAMPLER_N,
            SAMPLER_CROSS_REPLICATES,
            mix_seed(seed, 0xC401 + i as u64),
        )
        .expect("sampling succeeds");
        let pf = lag_profile(&fft, SAMPLER_LAG_MAX);
        let pc = lag_profile(&chol, SAMPLER_LAG_MAX);
        let worst = pf
            .iter()
            .zip(&pc)
            .map(|(&(mf, sf), &(mc, sc))| {
                let se = (sf * sf + sc * sc).sqrt();
                (mf - mc).abs() / se.max(1e-300)
            })
            .fold(0.0f64, f64::max);
        cases.push(case(
            format!("fft_vs_cholesky[{name}]"),
            worst <= 3.5,
            format!("worst per-lag |Δ|/joint-se: {worst:.3}"),
        ));
    }

    // Bitwise thread invariance on a smaller draw.
    let model = CovarianceModel::power_law(0.75).expect("valid");
    let inv_seed = mix_seed(seed, 0x7314);
    let default_pool = sampler::sample(&model, SAMPLER_N, 2000, inv_seed).expect("sampling succeeds");
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool builds")
        .install(|| sampler::sample(&model, SAMPLER_N, 2000, inv_seed).expect("sampling succeeds"));
    let identical = default_pool
        .rows()
        .zip(single.rows())
        .all(|(a, b)| a == b);
    cases.push(case(
        "thread_invariance",
        identical,
        "single-thread and default-pool ensembles are bit-identical".to_string(),
    ));

    SuiteReport::new("sampler", cases)
}
