//! End-to-end tests of the bmlab binary: output contracts, byte-level
//! determinism across runs and worker counts, config-file precedence,
//! and the exit-code map (0 ok, 2 usage, 3 computation, 4 I/O).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bmlab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bmlab"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

const RATES_HEADER: &str = "n,sigma_n_sq,dtv_value,dtv_stderr,ks_value,bound_main_term1,bound_main_term2,bound_variance,stein_bound,regime_rate";
const VARPHI_HEADER: &str =
    "n,var_phi,var_phi_stderr,rhs_variance,ratio,mean_phi,mean_phi_stderr,sigma_n_sq,duality_gap";

// ---------------------------------------------------------------------------
// coeffs
// ---------------------------------------------------------------------------

#[test]
fn coeffs_h2_prints_single_row_and_rank() {
    let out = bmlab(&["coeffs", "h2"], &[]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("2,1.0000000000000000e0,2.0000000000000000e0"));
    assert!(text.contains("hermite_rank,2"));
    assert!(!text.contains("centered away"));
}

#[test]
fn coeffs_absx_flags_centered_mean() {
    let out = bmlab(&["coeffs", "absx:p=1"], &[]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("(centered away)"));
    assert!(text.contains("c_0 = 7.97884560802"));
    assert!(text.contains("hermite_rank,2"));
    // c_2 = sqrt(2/pi)/2.
    assert!(text.contains("2,3.98942280401"));
}

#[test]
fn coeffs_h1_reports_rank_one() {
    let out = bmlab(&["coeffs", "h1"], &[]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("hermite_rank,1"));
}

#[test]
fn coeffs_bad_spec_is_usage_error() {
    let out = bmlab(&["coeffs", "waves:p=1"], &[]);
    assert_eq!(code(&out), 2);
}

#[test]
fn coeffs_writes_csv_file() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("table.csv");
    let out = bmlab(
        &["coeffs", "h2", "--csv", path.to_str().expect("utf8")],
        &[],
    );
    assert_eq!(code(&out), 0);
    let table = fs::read_to_string(&path).expect("csv written");
    assert!(table.starts_with("q,coeff,chaos_weight\n"));
    assert!(table.contains("2,1.0000000000000000e0"));
}

// ---------------------------------------------------------------------------
// rates
// ---------------------------------------------------------------------------

fn run_rates_g(out_path: &Path, g: &str, extra: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut args = vec![
        "rates",
        "--model",
        "ar1:phi=0.5",
        "--g",
        g,
        "--n-grid",
        "256,512",
        "--replicates",
        "1500",
        "--seed",
        "42",
        "--out",
        out_path.to_str().expect("utf8"),
    ];
    args.extend_from_slice(extra);
    bmlab(&args, envs)
}

fn run_rates(out_path: &Path, extra: &[&str], envs: &[(&str, &str)]) -> Output {
    run_rates_g(out_path, "h2", extra, envs)
}

#[test]
fn rates_csv_is_byte_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().expect("tempdir");
    let paths: Vec<_> = (0..4).map(|i| dir.path().join(format!("r{i}.csv"))).collect();
    let outs = [
        run_rates(&paths[0], &[], &[]),
        run_rates(&paths[1], &[], &[]),
        run_rates(&paths[2], &[], &[("BML_THREADS", "1")]),
        run_rates(&paths[3], &[], &[("BML_THREADS", "3")]),
    ];
    for out in &outs {
        assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes: Vec<_> = paths.iter().map(|p| fs::read(p).expect("csv")).collect();
    assert_eq!(bytes[0], bytes[1], "re-run changed the CSV");
    assert_eq!(bytes[0], bytes[2], "single-thread run changed the CSV");
    assert_eq!(bytes[0], bytes[3], "three-thread run changed the CSV");
    // Stdout JSON summaries are identical too.
    assert_eq!(stdout(&outs[0]), stdout(&outs[2]));

    let text = String::from_utf8(bytes[0].clone()).expect("utf8");
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(RATES_HEADER));
    assert_eq!(lines.count(), 2);

    let summary: serde_json::Value =
        serde_json::from_str(&stdout(&outs[0])).expect("summary is JSON");
    for key in [
        "distance",
        "fitted_slope",
        "slope_ci",
        "fitted_constant",
        "points_dropped",
        "noise_floor",
        "fit_error",
    ] {
        assert!(summary.get(key).is_some(), "summary missing {key}");
    }
    assert_eq!(summary["distance"], "tv_hist");
}

#[test]
fn rates_rejects_low_replicate_counts() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run_rates(&dir.path().join("r.csv"), &["--replicates", "500"], &[]);
    assert_eq!(code(&out), 2);
}

#[test]
fn rates_requires_an_output_path() {
    let out = bmlab(
        &[
            "rates", "--model", "white", "--g", "h2", "--n-grid", "256,512", "--replicates",
            "1500",
        ],
        &[],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn rates_gates_rank_one_functions() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("r.csv");
    let denied = run_rates_g(&path, "h1", &[], &[]);
    assert_eq!(code(&denied), 2);
    assert!(String::from_utf8_lossy(&denied.stderr).contains("--allow-rank1"));
    let allowed = run_rates_g(&path, "h1", &["--allow-rank1"], &[]);
    assert_eq!(code(&allowed), 0, "stderr: {}", String::from_utf8_lossy(&allowed.stderr));
    assert!(path.exists());
}

#[test]
fn rates_unknown_distance_is_usage_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run_rates(&dir.path().join("r.csv"), &["--distance", "wasserstein"], &[]);
    assert_eq!(code(&out), 2);
}

#[test]
fn rates_kolmogorov_summary_reports_method() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run_rates(&dir.path().join("r.csv"), &["--distance", "kolmogorov"], &[]);
    assert_eq!(code(&out), 0);
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("JSON");
    assert_eq!(summary["distance"], "kolmogorov");
}

#[test]
fn invalid_bml_threads_is_usage_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run_rates(&dir.path().join("r.csv"), &[], &[("BML_THREADS", "many")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg_csv = dir.path().join("from_config.csv");
    let cfg_path = dir.path().join("run.conf");
    fs::write(
        &cfg_path,
        format!(
            "# experiment defaults\nmodel = ar1:phi=0.5\ng = h2\nn_grid = 256,512\nreplicates = 1200\nseed = 42\nout = {}\n",
            cfg_csv.display()
        ),
    )
    .expect("config written");

    let from_config = bmlab(
        &["rates", "--config", cfg_path.to_str().expect("utf8")],
        &[],
    );
    assert_eq!(
        code(&from_config),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&from_config.stderr)
    );
    assert!(cfg_csv.exists());

    // A flag overrides the file; the result matches a pure-flag run.
    let flag_csv = dir.path().join("flag.csv");
    let with_flag = bmlab(
        &[
            "rates",
            "--config",
            cfg_path.to_str().expect("utf8"),
            "--replicates",
            "1500",
            "--out",
            flag_csv.to_str().expect("utf8"),
        ],
        &[],
    );
    assert_eq!(code(&with_flag), 0);
    let pure_csv = dir.path().join("pure.csv");
    let pure = run_rates(&pure_csv, &[], &[]);
    assert_eq!(code(&pure), 0);
    assert_eq!(
        fs::read(&flag_csv).expect("csv"),
        fs::read(&pure_csv).expect("csv"),
        "flag-over-config run must equal the pure-flag run"
    );
    assert_ne!(
        fs::read(&flag_csv).expect("csv"),
        fs::read(&cfg_csv).expect("csv"),
        "different replicate counts must change the data"
    );
}

#[test]
fn config_unknown_key_is_usage_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg_path = dir.path().join("bad.conf");
    fs::write(&cfg_path, "workers = 3\n").expect("config written");
    let out = bmlab(
        &["rates", "--config", cfg_path.to_str().expect("utf8")],
        &[],
    );
    assert_eq!(code(&out), 2);
}

// ---------------------------------------------------------------------------
// varphi
// ---------------------------------------------------------------------------

#[test]
fn varphi_emits_consistent_csv() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("v.csv");
    let out = bmlab(
        &[
            "varphi",
            "--model",
            "white",
            "--g",
            "h2",
            "--n-grid",
            "64,128",
            "--replicates",
            "1000",
            "--seed",
            "3",
            "--out",
            path.to_str().expect("utf8"),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).expect("csv");
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], VARPHI_HEADER);
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let fields: Vec<f64> = line
            .split(',')
            .map(|t| t.parse::<f64>().expect("numeric field"))
            .collect();
        let (var_phi, rhs, ratio) = (fields[1], fields[3], fields[4]);
        assert!((ratio - var_phi / rhs).abs() <= 1e-12 * ratio.abs());
        let (mean_phi, sigma_sq, gap) = (fields[5], fields[7], fields[8]);
        assert!((gap - (mean_phi - sigma_sq)).abs() <= 1e-12);
        // White noise H₂: σₙ² = 2 exactly; the duality gap is MC noise.
        assert!((sigma_sq - 2.0).abs() <= 1e-12);
        let mean_se = fields[6];
        assert!(gap.abs() <= 5.0 * mean_se, "gap {gap} vs stderr {mean_se}");
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[test]
fn verify_single_suite_emits_json_and_passes() {
    let out = bmlab(&["verify", "--suite", "logconvex", "--seed", "1"], &[]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("JSON");
    assert_eq!(doc["all_passed"], true);
    assert_eq!(doc["suites"][0]["suite"], "logconvex");
    assert!(doc["suites"][0]["cases"].as_array().expect("cases").len() >= 5);
}

#[test]
fn verify_unknown_suite_is_usage_error() {
    let out = bmlab(&["verify", "--suite", "everything"], &[]);
    assert_eq!(code(&out), 2);
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

#[test]
fn sample_dump_check_and_corruption() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("dump.bin");
    let out = bmlab(
        &[
            "sample", "--model", "white", "--n", "8", "--replicates", "2", "--seed", "5",
            "--out", path.to_str().expect("utf8"),
        ],
        &[],
    );
    assert_eq!(code(&out), 0);
    let bytes = fs::read(&path).expect("dump");
    // 16 binary64 payload values plus a fixed-size header.
    assert_eq!(bytes.len(), 144);

    // Same command line reproduces the dump byte for byte.
    let path2 = dir.path().join("dump2.bin");
    let out2 = bmlab(
        &[
            "sample", "--model", "white", "--n", "8", "--replicates", "2", "--seed", "5",
            "--out", path2.to_str().expect("utf8"),
        ],
        &[],
    );
    assert_eq!(code(&out2), 0);
    assert_eq!(bytes, fs::read(&path2).expect("dump2"));

    let check = bmlab(&["sample", "--check", path.to_str().expect("utf8")], &[]);
    assert_eq!(code(&check), 0);
    assert!(stdout(&check).starts_with("ok,model=white,n=8,replicates=2,seed=5"));

    let mut corrupted = bytes.clone();
    corrupted[..4].copy_from_slice(b"XXXX");
    fs::write(&path, corrupted).expect("overwrite");
    let bad = bmlab(&["sample", "--check", path.to_str().expect("utf8")], &[]);
    assert_eq!(code(&bad), 4);
}

#[test]
fn sample_requires_model_unless_checking() {
    let out = bmlab(&["sample", "--n", "8", "--replicates", "2"], &[]);
    assert_eq!(code(&out), 2);
}
