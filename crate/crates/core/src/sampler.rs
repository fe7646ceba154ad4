//! Exact simulation of R replicates of the stationary centered Gaussian
//! vector (X_0, …, X_{n−1}) with covariance ρ(i−j).
//!
//! The workhorse is circulant embedding: the n×n Toeplitz covariance is
//! embedded in a circulant matrix of power-of-two size M ≥ 2(n−1), whose
//! eigenvalues come from one real FFT of the first row. Each replicate then
//! costs one complex FFT of size M. Negative embedding eigenvalues above
//! −1e−8 are clipped to zero; anything lower is a hard error — a silently
//! biased sampler is worse than a failing one — and the O(n³) Cholesky path
//! [`chol_sample`] is the fallback (and the cross-validation oracle).
//!
//! Replicate r draws from the dedicated stream `replicate_rng(seed, r)`, so
//! ensembles are bit-identical regardless of thread count, batch size, or
//! generation order.

use crate::covariance::CovarianceModel;
use crate::fft;
use crate::rng::replicate_rng;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

/// Embedding eigenvalues in [−1e−8, 0) are treated as roundoff and clipped.
pub const EIGENVALUE_CLIP: f64 = -1e-8;

/// Diagonal jitter added when the Toeplitz Cholesky factorization stalls.
const CHOLESKY_JITTER: f64 = 1e-12;

/// Cost guard for the O(n³) Cholesky path.
const CHOL_MAX_N: usize = 4096;

/// Magic bytes opening a binary ensemble dump.
const DUMP_MAGIC: &[u8; 4] = b"BMLB";

#[derive(Debug, Clone, PartialEq)]
pub enum SamplerError {
    InvalidSize { detail: String },
    EmbeddingNotPSD { min_eigenvalue: f64 },
    NotPSD,
}

impl fmt::Display for SamplerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerError::InvalidSize { detail } => write!(f, "invalid ensemble size: {detail}"),
            SamplerError::EmbeddingNotPSD { min_eigenvalue } => write!(
                f,
                "circulant embedding has eigenvalue {min_eigenvalue} < {EIGENVALUE_CLIP}; \
                 use chol_sample"
            ),
            SamplerError::NotPSD => {
                write!(f, "covariance matrix is not positive definite (after jitter)")
            }
        }
    }
}

impl std::error::Error for SamplerError {}

#[derive(Debug)]
pub enum EnsembleIoError {
    Io(std::io::Error),
    BadMagic { found: [u8; 4] },
    SizeMismatch { detail: String },
    MetaInvalid { detail: String },
}

impl fmt::Display for EnsembleIoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleIoError::Io(e) => write!(f, "ensemble io: {e}"),
            EnsembleIoError::BadMagic { found } => {
                write!(f, "bad magic {found:?}, expected {DUMP_MAGIC:?}")
            }
            EnsembleIoError::SizeMismatch { detail } => write!(f, "size mismatch: {detail}"),
            EnsembleIoError::MetaInvalid { detail } => write!(f, "invalid meta sidecar: {detail}"),
        }
    }
}

impl std::error::Error for EnsembleIoError {}

impl From<std::io::Error> for EnsembleIoError {
    fn from(e: std::io::Error) -> Self {
        EnsembleIoError::Io(e)
    }
}

/// Sidecar metadata stored next to a binary ensemble dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct EnsembleMeta {
    model: String,
    seed: u64,
    n: usize,
    #[serde(rename = "R")]
    replicates: usize,
}

/// R independent replicates of (X_0, …, X_{n−1}), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    data: Vec<f64>,
    n: usize,
    replicates: usize,
    seed: u64,
    model_tag: String,
}

impl PathEnsemble {
    /// Wrap externally produced rows (row-major, R·n entries). Used by
    /// [`PathEnsemble::load`] and by oracle tests that need hand-built
    /// ensembles (e.g. path length 1, below the sampler's minimum).
    pub fn from_raw(
        data: Vec<f64>,
        n: usize,
        replicates: usize,
        seed: u64,
        model_tag: impl Into<String>,
    ) -> Result<Self, SamplerError> {
        if n == 0 || replicates == 0 || data.len() != n * replicates {
            return Err(SamplerError::InvalidSize {
                detail: format!(
                    "data length {} does not match R={replicates} × n={n}",
                    data.len()
                ),
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(SamplerError::InvalidSize {
                detail: format!("non-finite entry {bad}"),
            });
        }
        Ok(PathEnsemble {
            data,
            n,
            replicates,
            seed,
            model_tag: model_tag.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of replicates R.
    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    /// Replicate r as a slice of length n.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n..(r + 1) * self.n]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn par_rows(&self) -> rayon::slice::ChunksExact<'_, f64> {
        self.data.par_chunks_exact(self.n)
    }

    /// Empirical autocorrelation ρ̂(k) = (R(n−k))^{−1} Σ_r Σ_i x_i x_{i+k}
    /// for k = 0..=k_max.
    pub fn empirical_rho(&self, k_max: usize) -> Vec<f64> {
        assert!(k_max < self.n);
        let sums: Vec<f64> = (0..=k_max)
            .into_par_iter()
            .map(|k| {
                let mut acc = 0.0;
                for row in self.rows() {
                    for i in 0..self.n - k {
                        acc += row[i] * row[i + k];
                    }
                }
                acc
            })
            .collect();
        sums.iter()
            .enumerate()
            .map(|(k, s)| s / (self.replicates as f64 * (self.n - k) as f64))
            .collect()
    }

    /// Grand mean over all R·n entries.
    pub fn grand_mean(&self) -> f64 {
        crate::util::pairwise_sum(&self.data) / (self.data.len() as f64)
    }

    /// Write the binary dump (16-byte header: magic "BMLB", u32 R, u32 n,
    /// u32 reserved; then R·n little-endian binary64 values, row-major)
    /// plus a `<path>.meta.json` sidecar.
    pub fn dump(&self, path: &Path) -> Result<(), EnsembleIoError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(DUMP_MAGIC)?;
        file.write_all(&(self.replicates as u32).to_le_bytes())?;
        file.write_all(&(self.n as u32).to_le_bytes())?;
        file.write_all(&0u32.to_le_bytes())?;
        for v in &self.data {
            file.write_all(&v.to_le_bytes())?;
        }
        file.flush()?;
        let meta = EnsembleMeta {
            model: self.model_tag.clone(),
            seed: self.seed,
            n: self.n,
            replicates: self.replicates,
        };
        let meta_text = serde_json::to_string_pretty(&meta)
            .map_err(|e| EnsembleIoError::MetaInvalid { detail: e.to_string() })?;
        std::fs::write(meta_sidecar_path(path), meta_text)?;
        Ok(())
    }

    /// Read a dump written by [`PathEnsemble::dump`].
    pub fn load(path: &Path) -> Result<Self, EnsembleIoError> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        file.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(EnsembleIoError::BadMagic { found: magic });
        }
        let mut word = [0u8; 4];
        file.read_exact(&mut word)?;
        let replicates = u32::from_le_bytes(word) as usize;
        file.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word) as usize;
        file.read_exact(&mut word)?;
        let mut data = vec![0.0f64; replicates * n];
        let mut bytes = vec![0u8; 8 * data.len()];
        file.read_exact(&mut bytes).map_err(|e| EnsembleIoError::SizeMismatch {
            detail: format!("expected {} payload bytes: {e}", bytes.len()),
        })?;
        let mut tail = [0u8; 1];
        if file.read(&mut tail)? != 0 {
            return Err(EnsembleIoError::SizeMismatch {
                detail: "trailing bytes after payload".to_string(),
            });
        }
        for (v, chunk) in data.iter_mut().zip(bytes.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("chunk is 8 bytes"));
        }
        let meta_path = meta_sidecar_path(path);
        let meta_text =
            std::fs::read_to_string(&meta_path).map_err(|e| EnsembleIoError::MetaInvalid {
                detail: format!("{}: {e}", meta_path.display()),
            })?;
        let meta: EnsembleMeta =
            serde_json::from_str(&meta_text).map_err(|e| EnsembleIoError::MetaInvalid {
                detail: e.to_string(),
            })?;
        if meta.n != n || meta.replicates != replicates {
            return Err(EnsembleIoError::MetaInvalid {
                detail: format!(
                    "sidecar says R={} n={}, header says R={replicates} n={n}",
                    meta.replicates, meta.n
                ),
            });
        }
        Ok(PathEnsemble {
            data,
            n,
            replicates,
            seed: meta.seed,
            model_tag: meta.model,
        })
    }
}

fn meta_sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".meta.json");
    std::path::PathBuf::from(os)
}

/// Eigenvalues of the circulant embedding of order M = smallest power of
/// two ≥ 2(n−1): first row (ρ(0), ρ(1), …, ρ(M/2), ρ(M/2−1), …, ρ(1)).
/// Diagnostic output — negative values are reported, not clipped.
pub fn embed_spectrum(m: &CovarianceModel, n: usize) -> Vec<f64> {
    assert!(n >= 2, "embedding needs n >= 2");
    let size = (2 * (n - 1)).next_power_of_two().max(2);
    let row: Vec<f64> = (0..size)
        .map(|j| m.rho(j.min(size - j) as i64))
        .collect();
    fft::circulant_eigenvalues(&row)
}

fn check_sizes(n: usize, replicates: usize) -> Result<(), SamplerError> {
    if n < 2 {
        return Err(SamplerError::InvalidSize {
            detail: format!("n = {n}, need n >= 2"),
        });
    }
    if replicates < 1 {
        return Err(SamplerError::InvalidSize {
            detail: "R = 0, need R >= 1".to_string(),
        });
    }
    if n > u32::MAX as usize || replicates > u32::MAX as usize {
        return Err(SamplerError::InvalidSize {
            detail: "R and n must fit in u32".to_string(),
        });
    }
    Ok(())
}

/// Replicates 0..R of N(0, Σ), Σ_{ij} = ρ(i−j), by circulant embedding.
pub fn sample(
    m: &CovarianceModel,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<PathEnsemble, SamplerError> {
    sample_range(m, n, 0..replicates as u64, seed)
}

/// The replicates with global indices in `range`, under the same stream
/// contract as [`sample`] — generating 0..R in one call or in consecutive
/// range batches yields bit-identical rows.
pub fn sample_range(
    m: &CovarianceModel,
    n: usize,
    range: Range<u64>,
    seed: u64,
) -> Result<PathEnsemble, SamplerError> {
    let replicates = (range.end - range.start) as usize;
    check_sizes(n, replicates)?;
    let lambda = embed_spectrum(m, n);
    let min_lambda = lambda.iter().copied().fold(f64::INFINITY, f64::min);
    if min_lambda < EIGENVALUE_CLIP {
        return Err(SamplerError::EmbeddingNotPSD {
            min_eigenvalue: min_lambda,
        });
    }
    let size = lambda.len();
    let half = size / 2;
    // Amplitudes: full weight at the two real frequencies, λ/2 elsewhere
    // (each interior frequency splits its variance over two draws).
    let amp: Vec<f64> = lambda
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let l = l.max(0.0);
            if j == 0 || j == half {
                l.sqrt()
            } else {
                (l / 2.0).sqrt()
            }
        })
        .collect();
    let plan = fft::plan_forward(size);
    let norm = 1.0 / (size as f64).sqrt();
    let mut data = vec![0.0f64; replicates * n];
    data.par_chunks_exact_mut(n).enumerate().for_each_init(
        || {
            (
                vec![Complex::new(0.0, 0.0); size],
                vec![Complex::new(0.0, 0.0); plan.get_inplace_scratch_len()],
            )
        },
        |(buf, scratch), (offset, row)| {
            let r = range.start + offset as u64;
            let mut rng = replicate_rng(seed, r);
            // Fixed draw order: z_0, then (a_j, b_j) for j = 1..M/2−1,
            // then z_{M/2}.
            let z0: f64 = rng.sample(StandardNormal);
            buf[0] = Complex::new(amp[0] * z0, 0.0);
            for j in 1..half {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                buf[j] = Complex::new(amp[j] * a, amp[j] * b);
                buf[size - j] = buf[j].conj();
            }
            let z_half: f64 = rng.sample(StandardNormal);
            buf[half] = Complex::new(amp[half] * z_half, 0.0);
            plan.process_with_scratch(buf, scratch);
            for (x, c) in row.iter_mut().zip(buf.iter()) {
                *x = c.re * norm;
            }
        },
    );
    Ok(PathEnsemble {
        data,
        n,
        replicates,
        seed,
        model_tag: m.spec_string(),
    })
}

/// Lower-triangular Cholesky factor of the n×n Toeplitz covariance,
/// retried once with diagonal jitter.
fn toeplitz_cholesky(m: &CovarianceModel, n: usize) -> Result<Vec<f64>, SamplerError> {
    let rho: Vec<f64> = (0..n).map(|k| m.rho(k as i64)).collect();
    for jitter in [0.0, CHOLESKY_JITTER] {
        if let Some(l) = try_cholesky(&rho, n, jitter) {
            return Ok(l);
        }
    }
    Err(SamplerError::NotPSD)
}

fn try_cholesky(rho: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = rho[i - j];
            if i == j {
                sum += jitter;
            }
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Same law as [`sample`], via the dense Cholesky factor. O(n³) setup and
/// O(n²) per replicate — the reference path and cross-validation oracle.
pub fn chol_sample(
    m: &CovarianceModel,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<PathEnsemble, SamplerError> {
    check_sizes(n, replicates)?;
    if n > CHOL_MAX_N {
        return Err(SamplerError::InvalidSize {
            detail: format!("n = {n} exceeds Cholesky cost guard {CHOL_MAX_N}"),
        });
    }
    let l = toeplitz_cholesky(m, n)?;
    let mut data = vec![0.0f64; replicates * n];
    data.par_chunks_exact_mut(n).enumerate().for_each_init(
        || vec![0.0f64; n],
        |z, (r, row)| {
            let mut rng = replicate_rng(seed, r as u64);
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            for i in 0..n {
                let mut acc = 0.0;
                for (k, &zk) in z.iter().enumerate().take(i + 1) {
                    acc += l[i * n + k] * zk;
                }
                row[i] = acc;
            }
        },
    );
    Ok(PathEnsemble {
        data,
        n,
        replicates,
        seed,
        model_tag: m.spec_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn white_noise_spectrum_is_flat() {
        let m = CovarianceModel::white_noise();
        for lambda in embed_spectrum(&m, 8) {
            assert_abs_diff_eq!(lambda, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ar1_spectrum_is_positive() {
        let m = CovarianceModel::ar1(0.5).expect("valid");
        let lambda = embed_spectrum(&m, 64);
        assert_eq!(lambda.len(), 128);
        let min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0, "min eigenvalue {min}");
    }

    #[test]
    fn pathological_table_is_flagged() {
        let m = CovarianceModel::table(vec![1.0, -0.9], "table:inline").expect("valid");
        let lambda = embed_spectrum(&m, 16);
        let min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
        // 1 + 2·(−0.9)·cos θ dips to ≈ −0.8.
        assert!(min < -0.5, "min eigenvalue {min}");
        assert!(matches!(
            sample(&m, 16, 4, 7),
            Err(SamplerError::EmbeddingNotPSD { .. })
        ));
        assert!(matches!(
            chol_sample(&m, 16, 4, 7),
            Err(SamplerError::NotPSD)
        ));
    }

    #[test]
    fn size_validation() {
        let m = CovarianceModel::white_noise();
        assert!(matches!(
            sample(&m, 1, 10, 0),
            Err(SamplerError::InvalidSize { .. })
        ));
        assert!(matches!(
            sample(&m, 8, 0, 0),
            Err(SamplerError::InvalidSize { .. })
        ));
        assert!(matches!(
            chol_sample(&m, 8192, 1, 0),
            Err(SamplerError::InvalidSize { .. })
        ));
    }

    #[test]
    fn reproducible_and_batch_invariant() {
        let m = CovarianceModel::ar1(0.5).expect("valid");
        let full = sample(&m, 32, 10, 99).expect("samples");
        let again = sample(&m, 32, 10, 99).expect("samples");
        assert_eq!(full, again);
        // Consecutive range batches reproduce the same rows.
        let first = sample_range(&m, 32, 0..6, 99).expect("samples");
        let second = sample_range(&m, 32, 6..10, 99).expect("samples");
        for r in 0..6 {
            assert_eq!(full.row(r), first.row(r));
        }
        for r in 6..10 {
            assert_eq!(full.row(r), second.row(r - 6));
        }
        // Different seeds decorrelate.
        let other = sample(&m, 32, 10, 100).expect("samples");
        assert_ne!(full, other);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let m = CovarianceModel::fgn(0.7).expect("valid");
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("pool");
        let serial = pool.install(|| sample(&m, 64, 20, 5).expect("samples"));
        let parallel = sample(&m, 64, 20, 5).expect("samples");
        assert_eq!(serial, parallel);
    }

    #[test]
    fn smoke_covariance_fidelity() {
        // Light version of the full calibration battery (which runs at
        // R = 1e5 in the verification suite): R = 4000, tolerance 0.05.
        let m = CovarianceModel::ar1(0.5).expect("valid");
        let paths = sample(&m, 64, 4000, 11).expect("samples");
        let rho_hat = paths.empirical_rho(4);
        for (k, &r) in rho_hat.iter().enumerate() {
            assert_abs_diff_eq!(r, 0.5f64.powi(k as i32), epsilon = 0.05);
        }
        assert!(paths.grand_mean().abs() < 0.05);
        assert!(paths.rows().all(|row| row.iter().all(|x| x.is_finite())));
    }

    #[test]
    fn sample_and_cholesky_agree_in_distribution() {
        let m = CovarianceModel::power_law(1.0).expect("valid");
        let a = sample(&m, 48, 4000, 21).expect("samples");
        let b = chol_sample(&m, 48, 4000, 21).expect("samples");
        let ra = a.empirical_rho(5);
        let rb = b.empirical_rho(5);
        for k in 0..=5 {
            // Joint MC tolerance at R = 4000.
            assert_abs_diff_eq!(ra[k], rb[k], epsilon = 0.07);
            assert_abs_diff_eq!(ra[k], m.rho(k as i64), epsilon = 0.05);
        }
    }

    #[test]
    fn cholesky_variance_is_exact_for_white_noise() {
        let m = CovarianceModel::white_noise();
        let paths = chol_sample(&m, 16, 2000, 3).expect("samples");
        let rho_hat = paths.empirical_rho(2);
        assert_abs_diff_eq!(rho_hat[0], 1.0, epsilon = 0.05);
        assert_abs_diff_eq!(rho_hat[1], 0.0, epsilon = 0.05);
    }

    #[test]
    fn dump_load_roundtrip() {
        let m = CovarianceModel::ar1(-0.3).expect("valid");
        let paths = sample(&m, 16, 8, 123).expect("samples");
        let dir = std::env::temp_dir();
        let path = dir.join(format!("bmlab_dump_test_{}.bmlb", std::process::id()));
        paths.dump(&path).expect("dumps");
        let loaded = PathEnsemble::load(&path).expect("loads");
        assert_eq!(paths, loaded);
        assert_eq!(loaded.model_tag(), "ar1:phi=-0.3");
        assert_eq!(loaded.seed(), 123);

        // Corrupt the magic and expect a structured failure.
        let mut bytes = std::fs::read(&path).expect("reads");
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).expect("writes");
        assert!(matches!(
            PathEnsemble::load(&path),
            Err(EnsembleIoError::BadMagic { .. })
        ));
        std::fs::remove_file(&path).ok();
        std::fs::remove_file(meta_sidecar_path(&path)).ok();
    }
}
