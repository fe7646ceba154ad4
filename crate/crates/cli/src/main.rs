//! bmlab: batch driver for the stationary-Gaussian functional
//! laboratory. Subcommands print Hermite coefficient tables, run
//! distance-vs-n rate experiments and variance-target experiments to
//! CSV, execute the verification suites, and write or validate binary
//! path-ensemble dumps.
//!
//! Exit codes: 0 success, 2 usage/parse error, 3 computation error or
//! failed verification, 4 I/O error. Identical command lines (and seed)
//! produce byte-identical outputs regardless of worker count; the
//! `BML_THREADS` environment variable caps the worker pool.

use bmlab_core::covariance::CovarianceModel;
use bmlab_core::distance::{self, DistanceMethod, RatePoint};
use bmlab_core::experiment::{self, RatesRun, VarPhiRow};
use bmlab_core::hermite::{self, HermiteSeries};
use bmlab_core::quadrature::QuadratureSpec;
use bmlab_core::sampler::{self, PathEnsemble};
use bmlab_core::verify::{self, SuiteKind, SuiteReport};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const DEFAULT_REPLICATES: usize = 100_000;
const DEFAULT_SEED: u64 = 20_240_817;
const DEFAULT_GRID: [usize; 6] = [256, 512, 1024, 2048, 4096, 8192];
/// Series length used when projecting closed-form functions.
const PROJECTION_TERMS: usize = 20;
/// Distance experiments need this many replicates for a usable histogram.
const MIN_DISTANCE_REPLICATES: usize = 1000;
/// Variance experiments need this many replicates for a stderr.
const MIN_VARIANCE_REPLICATES: usize = 100;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum AppError {
    /// Bad arguments, config, or spec syntax (exit 2).
    Usage(String),
    /// A numerical routine reported failure, or a suite failed (exit 3).
    Compute(String),
    /// File-system trouble (exit 4).
    Io(String),
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Compute(_) => 3,
            AppError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Compute(m) | AppError::Io(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "bmlab",
    version,
    about = "Numerical laboratory for Gaussian-subordinated stationary sequences",
    long_about = "Simulate g(X_i) functionals of stationary Gaussian sequences, estimate \
normal-approximation distances and their bounds, and verify the supporting inequalities.\n\
Model specs: powerlaw:alpha=0.75 | fgn:H=0.7 | ar1:phi=0.5 | white | table:@file\n\
Function specs: h2 | h1 | absx:p=<real> | hermite:@file"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the Hermite coefficient table, rank, and second moment of a function spec
    Coeffs {
        /// h2 | h1 | absx:p=<real> | hermite:@<coeff file>
        g_spec: String,
        /// Also write the table to this CSV path
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Distance-vs-n experiment: CSV per grid point plus a JSON fit summary on stdout
    Rates(RunArgs),
    /// Variance-target experiment: CSV per grid point
    Varphi(RunArgs),
    /// Run verification suites and print a JSON report
    Verify {
        /// gebelein | sums | stein | vanishing | logconvex | sampler | all
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Write a binary path-ensemble dump, or validate an existing one
    Sample {
        /// Covariance model spec
        #[arg(long, required_unless_present = "check")]
        model: Option<String>,
        /// Series length per replicate
        #[arg(long, required_unless_present = "check")]
        n: Option<usize>,
        /// Number of replicate paths
        #[arg(long, required_unless_present = "check")]
        replicates: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Output dump path
        #[arg(long, required_unless_present = "check")]
        out: Option<PathBuf>,
        /// Validate this dump instead of sampling (prints its metadata)
        #[arg(long)]
        check: Option<PathBuf>,
    },
}

/// Shared experiment arguments. Every value can also come from a
/// `key=value` config file; precedence is flag > file > default.
#[derive(Args, Debug)]
struct RunArgs {
    /// Function spec: h2 | h1 | absx:p=<real> | hermite:@<file>
    #[arg(long)]
    g: Option<String>,
    /// Covariance model spec
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated strictly increasing series lengths
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (key `out` in config files)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Distance driving the rate fit: tv_hist | kolmogorov
    #[arg(long)]
    distance: Option<String>,
    /// key=value config file supplying defaults for the flags above
    #[arg(long)]
    config: Option<PathBuf>,
    /// Permit Hermite-rank-1 functions (baseline comparisons)
    #[arg(long)]
    allow_rank1: bool,
}

// ---------------------------------------------------------------------------
// Function-spec parsing
// ---------------------------------------------------------------------------

struct GFunction {
    series: HermiteSeries,
    tag: String,
    rank: usize,
    /// Mean subtracted during centering, when the parsed function had one.
    removed_mean: Option<f64>,
}

fn parse_g(spec: &str) -> Result<GFunction, AppError> {
    let spec = spec.trim();
    if spec == "h2" || spec == "h1" {
        let q = if spec == "h2" { 2 } else { 1 };
        return Ok(GFunction {
            series: HermiteSeries::basis(q),
            tag: spec.to_string(),
            rank: q,
            removed_mean: None,
        });
    }
    let (raw, removed_mean): (HermiteSeries, Option<f64>) = if let Some(rest) =
        spec.strip_prefix("absx:p=")
    {
        let p: f64 = rest
            .parse()
            .map_err(|_| usage(format!("absx exponent '{rest}' is not a number")))?;
        if !(p.is_finite() && p > 0.0 && p <= 10.0) {
            return Err(usage(format!(
                "absx exponent must lie in (0, 10], got {p}"
            )));
        }
        let projected = hermite::project(
            move |x: f64| x.abs().powf(p),
            PROJECTION_TERMS,
            &QuadratureSpec::default(),
        )
        .map_err(|e| AppError::Compute(format!("projection of |x|^{p} failed: {e}")))?;
        let (centered, c0) = projected.centered();
        (centered, Some(c0))
    } else if let Some(path) = spec.strip_prefix("hermite:@") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Io(format!("cannot read coefficient file {path}: {e}")))?;
        let coeffs: Vec<f64> = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| usage(format!("coefficient '{t}' in {path} is not a number")))
            })
            .collect::<Result<_, _>>()?;
        if coeffs.is_empty() {
            return Err(usage(format!("coefficient file {path} is empty")));
        }
        let raw = HermiteSeries::new(coeffs)
            .map_err(|e| usage(format!("bad coefficient list in {path}: {e}")))?;
        let (centered, c0) = raw.centered();
        (centered, (c0 != 0.0).then_some(c0))
    } else {
        return Err(usage(format!(
            "unknown function spec '{spec}' (expected h2 | h1 | absx:p=<real> | hermite:@<file>)"
        )));
    };
    let rank = raw
        .hermite_rank()
        .map_err(|e| usage(format!("function spec '{spec}': {e}")))?;
    Ok(GFunction {
        series: raw,
        tag: spec.to_string(),
        rank,
        removed_mean,
    })
}

// ---------------------------------------------------------------------------
// Config resolution
// ---------------------------------------------------------------------------

const CONFIG_KEYS: [&str; 7] = ["g", "model", "n_grid", "replicates", "seed", "out", "distance"];

fn read_config(path: &Path) -> Result<BTreeMap<String, String>, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            usage(format!(
                "config {} line {}: expected key=value, got '{line}'",
                path.display(),
                lineno + 1
            ))
        })?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(usage(format!(
                "config {} line {}: unknown key '{key}' (known: {})",
                path.display(),
                lineno + 1,
                CONFIG_KEYS.join(", ")
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RunKind {
    Rates,
    Varphi,
}

struct ResolvedRun {
    g: GFunction,
    model: CovarianceModel,
    n_grid: Vec<usize>,
    replicates: usize,
    seed: u64,
    out: PathBuf,
    distance: DistanceMethod,
}

fn parse_grid(text: &str) -> Result<Vec<usize>, AppError> {
    let grid: Vec<usize> = text
        .split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| usage(format!("n-grid entry '{t}' is not a positive integer")))
        })
        .collect::<Result<_, _>>()?;
    if grid.is_empty() {
        return Err(usage("n-grid is empty"));
    }
    if grid[0] < 2 {
        return Err(usage("n-grid entries must be at least 2"));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(usage(format!(
                "n-grid must be strictly increasing, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    Ok(grid)
}

fn resolve_run(args: &RunArgs, kind: RunKind) -> Result<ResolvedRun, AppError> {
    let file = match &args.config {
        Some(path) => read_config(path)?,
        None => BTreeMap::new(),
    };
    let pick = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone().or_else(|| file.get(key).cloned())
    };

    let g_spec = pick(&args.g, "g").unwrap_or_else(|| "h2".to_string());
    let g = parse_g(&g_spec)?;
    if g.rank < 2 && !args.allow_rank1 {
        return Err(usage(format!(
            "function '{}' has Hermite rank {}; rank >= 2 is required unless --allow-rank1 is given",
            g.tag, g.rank
        )));
    }

    let model_spec = pick(&args.model, "model").unwrap_or_else(|| "white".to_string());
    let base = args
        .config
        .as_deref()
        .and_then(Path::parent)
        .unwrap_or_else(|| Path::new("."));
    let model = CovarianceModel::from_spec(&model_spec, base)
        .map_err(|e| usage(format!("bad model spec '{model_spec}': {e}")))?;

    let n_grid = match pick(&args.n_grid, "n_grid") {
        Some(text) => parse_grid(&text)?,
        None => DEFAULT_GRID.to_vec(),
    };

    let replicates = match (args.replicates, file.get("replicates")) {
        (Some(r), _) => r,
        (None, Some(text)) => text
            .parse()
            .map_err(|_| usage(format!("config replicates '{text}' is not an integer")))?,
        (None, None) => DEFAULT_REPLICATES,
    };
    let min = match kind {
        RunKind::Rates => MIN_DISTANCE_REPLICATES,
        RunKind::Varphi => MIN_VARIANCE_REPLICATES,
    };
    if replicates < min {
        return Err(usage(format!(
            "this experiment needs at least {min} replicates, got {replicates}"
        )));
    }

    let seed = match (args.seed, file.get("seed")) {
        (Some(s), _) => s,
        (None, Some(text)) => text
            .parse()
            .map_err(|_| usage(format!("config seed '{text}' is not a 64-bit integer")))?,
        (None, None) => DEFAULT_SEED,
    };

    let out = match (
        args.out.clone(),
        file.get("out").map(|s| PathBuf::from(s.clone())),
    ) {
        (Some(p), _) => p,
        (None, Some(p)) => p,
        (None, None) => return Err(usage("an output CSV path is required (--out or config key out)")),
    };

    let distance = match pick(&args.distance, "distance").as_deref() {
        None | Some("tv_hist") => DistanceMethod::TvHist,
        Some("kolmogorov") => DistanceMethod::Kolmogorov,
        Some(other) => {
            return Err(usage(format!(
                "unknown distance '{other}' (expected tv_hist | kolmogorov)"
            )))
        }
    };

    Ok(ResolvedRun {
        g,
        model,
        n_grid,
        replicates,
        seed,
        out,
        distance,
    })
}

// ---------------------------------------------------------------------------
// Output formatting
// ---------------------------------------------------------------------------

/// 17-significant-digit scientific form; None renders as `nan`.
fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn opt_num(x: Option<f64>) -> String {
    match x {
        Some(v) => num(v),
        None => "nan".to_string(),
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), AppError> {
    std::fs::write(path, content)
        .map_err(|e| AppError::Io(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_coeffs(g_spec: &str, csv: Option<&Path>) -> Result<(), AppError> {
    let g = parse_g(g_spec)?;
    let mut table = String::from("q,coeff,chaos_weight\n");
    let mut second_moment = 0.0;
    let mut factorial = 1.0;
    for (q, &c) in g.series.coeffs().iter().enumerate() {
        if q > 0 {
            factorial *= q as f64;
        }
        let weight = factorial * c * c;
        second_moment += weight;
        if c.abs() > g.series.rank_tol() {
            let _ = writeln!(table, "{q},{},{}", num(c), num(weight));
        }
    }
    if let Some(c0) = g.removed_mean {
        println!("c_0 = {} (centered away)", num(c0));
    }
    print!("{table}");
    println!("hermite_rank,{}", g.rank);
    println!("second_moment,{}", num(second_moment));
    if let Some(path) = csv {
        write_file(path, &table)?;
    }
    Ok(())
}

fn rates_csv(run: &RatesRun) -> String {
    let mut out = String::from(
        "n,sigma_n_sq,dtv_value,dtv_stderr,ks_value,bound_main_term1,bound_main_term2,bound_variance,stein_bound,regime_rate\n",
    );
    for row in &run.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.n,
            num(row.sigma_n_sq),
            num(row.tv.value),
            num(row.tv.stderr),
            num(row.ks.value),
            num(row.main.term1),
            num(row.main.term2),
            num(row.variance_target.total),
            num(row.stein.bound),
            opt_num(row.regime_rate),
        );
    }
    out
}

/// The fit the summary reports: the TV fit computed by the driver, or a
/// Kolmogorov-side fit using the KS sampling error as its noise floor.
fn summary_json(run: &RatesRun, method: DistanceMethod) -> serde_json::Value {
    let (fit, fit_error, floor) = match method {
        DistanceMethod::TvHist => (run.fit.clone(), run.fit_error.clone(), run.floor.value),
        DistanceMethod::Kolmogorov => {
            let points: Vec<RatePoint> = run
                .rows
                .iter()
                .map(|r| RatePoint {
                    n: r.n,
                    value: r.ks.value,
                    stderr: r.ks.stderr,
                })
                .collect();
            let floor = run.rows.first().map(|r| r.ks.stderr).unwrap_or(0.0);
            match distance::fit_rate_with_floor(&points, floor) {
                Ok(f) => (Some(f), None, floor),
                Err(e) => (None, Some(e.to_string()), floor),
            }
        }
    };
    match fit {
        Some(f) => json!({
            "distance": method.as_str(),
            "fitted_slope": f.slope,
            "slope_ci": [f.slope_ci.0, f.slope_ci.1],
            "fitted_constant": f.intercept.exp(),
            "points_dropped": f.dropped.len(),
            "noise_floor": floor,
            "fit_error": serde_json::Value::Null,
        }),
        None => json!({
            "distance": method.as_str(),
            "fitted_slope": serde_json::Value::Null,
            "slope_ci": serde_json::Value::Null,
            "fitted_constant": serde_json::Value::Null,
            "points_dropped": serde_json::Value::Null,
            "noise_floor": floor,
            "fit_error": fit_error,
        }),
    }
}

fn cmd_rates(args: &RunArgs) -> Result<(), AppError> {
    let cfg = resolve_run(args, RunKind::Rates)?;
    let run = experiment::run_rates(
        &cfg.model,
        &cfg.g.series,
        &cfg.g.tag,
        &cfg.n_grid,
        cfg.replicates,
        cfg.seed,
    )
    .map_err(|e| AppError::Compute(e.to_string()))?;
    write_file(&cfg.out, &rates_csv(&run))?;
    let summary = summary_json(&run, cfg.distance);
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}

fn varphi_csv(rows: &[VarPhiRow]) -> String {
    let mut out = String::from(
        "n,var_phi,var_phi_stderr,rhs_variance,ratio,mean_phi,mean_phi_stderr,sigma_n_sq,duality_gap\n",
    );
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.n,
            num(row.var_phi.variance),
            num(row.var_phi.stderr),
            num(row.rhs_variance),
            num(row.ratio),
            num(row.mean_phi),
            num(row.mean_phi_stderr),
            num(row.sigma_n_sq),
            num(row.mean_phi - row.sigma_n_sq),
        );
    }
    out
}

fn cmd_varphi(args: &RunArgs) -> Result<(), AppError> {
    let cfg = resolve_run(args, RunKind::Varphi)?;
    let rows = experiment::run_varphi(
        &cfg.model,
        &cfg.g.series,
        &cfg.g.tag,
        &cfg.n_grid,
        cfg.replicates,
        cfg.seed,
    )
    .map_err(|e| AppError::Compute(e.to_string()))?;
    write_file(&cfg.out, &varphi_csv(&rows))
}

fn cmd_verify(suite: &str, seed: u64) -> Result<(), AppError> {
    let reports: Vec<SuiteReport> = if suite == "all" {
        verify::run_all(seed)
    } else {
        let kind = SuiteKind::from_name(suite).ok_or_else(|| {
            usage(format!(
                "unknown suite '{suite}' (expected gebelein | sums | stein | vanishing | logconvex | sampler | all)"
            ))
        })?;
        vec![verify::run_suite(kind, seed)]
    };
    let all_passed = reports.iter().all(|r| r.passed);
    let doc = json!({
        "seed": seed,
        "all_passed": all_passed,
        "suites": reports,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&doc).expect("report serializes")
    );
    if all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = reports
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.suite.as_str())
            .collect();
        Err(AppError::Compute(format!(
            "verification failed: {}",
            failed.join(", ")
        )))
    }
}

fn cmd_sample(
    model: Option<&str>,
    n: Option<usize>,
    replicates: Option<usize>,
    seed: u64,
    out: Option<&Path>,
    check: Option<&Path>,
) -> Result<(), AppError> {
    if let Some(path) = check {
        let ens = PathEnsemble::load(path)
            .map_err(|e| AppError::Io(format!("dump {} is invalid: {e}", path.display())))?;
        println!(
            "ok,model={},n={},replicates={},seed={}",
            ens.model_tag(),
            ens.n(),
            ens.replicates(),
            ens.seed()
        );
        return Ok(());
    }
    let (model_spec, n, replicates, out) = (
        model.expect("required by clap"),
        n.expect("required by clap"),
        replicates.expect("required by clap"),
        out.expect("required by clap"),
    );
    let model = CovarianceModel::from_spec(model_spec, Path::new("."))
        .map_err(|e| usage(format!("bad model spec '{model_spec}': {e}")))?;
    let ens = sampler::sample(&model, n, replicates, seed)
        .map_err(|e| AppError::Compute(e.to_string()))?;
    ens.dump(out)
        .map_err(|e| AppError::Io(format!("cannot write dump {}: {e}", out.display())))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Entry
// ---------------------------------------------------------------------------

fn init_threads() -> Result<(), AppError> {
    if let Ok(raw) = std::env::var("BML_THREADS") {
        let threads: usize = raw
            .trim()
            .parse()
            .map_err(|_| usage(format!("BML_THREADS must be a positive integer, got '{raw}'")))?;
        if threads == 0 {
            return Err(usage("BML_THREADS must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| AppError::Compute(format!("cannot configure worker pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match &cli.cmd {
        Cmd::Coeffs { g_spec, csv } => cmd_coeffs(g_spec, csv.as_deref()),
        Cmd::Rates(args) => cmd_rates(args),
        Cmd::Varphi(args) => cmd_varphi(args),
        Cmd::Verify { suite, seed } => cmd_verify(suite, *seed),
        Cmd::Sample {
            model,
            n,
            replicates,
            seed,
            out,
            check,
        } => cmd_sample(
            model.as_deref(),
            *n,
            *replicates,
            *seed,
            out.as_deref(),
            check.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    // Terminate quietly when a downstream pipe closes (e.g. `| head`)
    // instead of panicking on the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(e) = init_threads().and_then(|()| dispatch(cli)) {
        eprintln!("error: {}", e.message());
        return ExitCode::from(e.exit_code());
    }
    ExitCode::SUCCESS
}
