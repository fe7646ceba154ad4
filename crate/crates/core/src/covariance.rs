//! Stationary covariance families ρ(k), their ℓᵖ partial sums, summability
//! diagnostics, and the deterministic log-convexity inequality between them.
//!
//! Every model is normalized so that ρ(0) = 1 (unit marginal variance),
//! ρ(−k) = ρ(k), and |ρ(k)| ≤ 1. The partial sums
//! S_p(n) = Σ_{|k|≤n} |ρ(k)|^p drive both the rate bounds and the
//! variance expansions downstream, so they are computed in a fixed
//! deterministic order (small lags added last) for bit-reproducibility.

use std::fmt;
use std::path::Path;

/// Tolerance when accepting the holds verdict of the log-convexity check.
const LOGCONVEXITY_SLACK: f64 = 1e-12;

/// |2H − 1| below this treats fractional Gaussian noise as independent
/// (its lag-≥1 covariances vanish identically at H = 1/2).
const FGN_WHITE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    EmptyTable,
    TableLagZeroNotOne {
        value: f64,
    },
    TableValueOutOfRange {
        index: usize,
        value: f64,
    },
    Parse {
        detail: String,
    },
    Io {
        path: String,
        detail: String,
    },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::ParamOutOfRange {
                name,
                value,
                constraint,
            } => write!(f, "parameter {name} = {value} violates {constraint}"),
            ModelError::EmptyTable => write!(f, "covariance table is empty"),
            ModelError::TableLagZeroNotOne { value } => {
                write!(f, "covariance table entry for lag 0 is {value}, expected 1")
            }
            ModelError::TableValueOutOfRange { index, value } => {
                write!(f, "covariance table entry {index} = {value} outside [-1, 1]")
            }
            ModelError::Parse { detail } => write!(f, "cannot parse model spec: {detail}"),
            ModelError::Io { path, detail } => write!(f, "cannot read {path}: {detail}"),
        }
    }
}

impl std::error::Error for ModelError {}

/// Verdict of the absolute-summability diagnostic for Σ_j |ρ(j)|^d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummabilityReport {
    pub holds: bool,
    /// Decay exponent of |ρ(k)|^d (∞ for geometric or finitely supported
    /// tails); the sum converges exactly when this exceeds 1.
    pub tail_exponent: f64,
}

/// Both sides of S_{4/3}(n)^{3/4} ≤ S_1(n)^{1/2} · S_2(n)^{1/4}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogConvexityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// A stationary unit-variance covariance sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceModel {
    /// ρ(k) = (1+|k|)^{−α}; the offset keeps ρ(0) = 1 exact. Convex and
    /// decreasing in |k|, hence positive semidefinite by Pólya's criterion.
    PowerLaw { alpha: f64 },
    /// Fractional-Gaussian-noise increments:
    /// ρ(k) = ½(|k+1|^{2H} − 2|k|^{2H} + |k−1|^{2H}).
    Fgn { hurst: f64 },
    /// ρ(k) = φ^{|k|}.
    Ar1 { phi: f64 },
    /// ρ(k) = 1_{k=0}.
    WhiteNoise,
    /// Explicit values for lags 0..=K, zero beyond; `tag` remembers the
    /// source for reporting.
    Table { values: Vec<f64>, tag: String },
}

impl CovarianceModel {
    /// ρ(k) = (1+|k|)^{−α}. Any α > 0 is constructible so the regime where
    /// Σ|ρ|^d diverges stays reachable by the diagnostics; rate formulas
    /// that additionally need α > 1/2 enforce that themselves.
    pub fn power_law(alpha: f64) -> Result<Self, ModelError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ModelError::ParamOutOfRange {
                name: "alpha",
                value: alpha,
                constraint: "alpha > 0",
            });
        }
        Ok(CovarianceModel::PowerLaw { alpha })
    }

    pub fn fgn(hurst: f64) -> Result<Self, ModelError> {
        if !(hurst.is_finite() && hurst > 0.0 && hurst < 1.0) {
            return Err(ModelError::ParamOutOfRange {
                name: "H",
                value: hurst,
                constraint: "0 < H < 1",
            });
        }
        Ok(CovarianceModel::Fgn { hurst })
    }

    pub fn ar1(phi: f64) -> Result<Self, ModelError> {
        if !(phi.is_finite() && phi.abs() < 1.0) {
            return Err(ModelError::ParamOutOfRange {
                name: "phi",
                value: phi,
                constraint: "-1 < phi < 1",
            });
        }
        Ok(CovarianceModel::Ar1 { phi })
    }

    pub fn white_noise() -> Self {
        CovarianceModel::WhiteNoise
    }

    /// Explicit table of ρ(k) for k = 0..=K (zero beyond K).
    pub fn table(values: Vec<f64>, tag: impl Into<String>) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::EmptyTable);
        }
        if (values[0] - 1.0).abs() > 1e-12 {
            return Err(ModelError::TableLagZeroNotOne { value: values[0] });
        }
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
                return Err(ModelError::TableValueOutOfRange { index, value: v });
            }
        }
        Ok(CovarianceModel::Table {
            values,
            tag: tag.into(),
        })
    }

    /// Parse the CLI model syntax: `powerlaw:alpha=0.75`, `fgn:H=0.7`,
    /// `ar1:phi=0.5`, `white`, `table:@file.csv` (one ρ(k) per line,
    /// k = 0, 1, 2, …; relative paths resolve against `base`).
    pub fn from_spec(spec: &str, base: &Path) -> Result<Self, ModelError> {
        let spec = spec.trim();
        if spec == "white" {
            return Ok(CovarianceModel::WhiteNoise);
        }
        let (kind, rest) = spec.split_once(':').ok_or_else(|| ModelError::Parse {
            detail: format!("'{spec}' (expected kind:params or 'white')"),
        })?;
        match kind {
            "powerlaw" => Self::power_law(parse_param(rest, "alpha")?),
            "fgn" => Self::fgn(parse_param(rest, "H")?),
            "ar1" => Self::ar1(parse_param(rest, "phi")?),
            "table" => {
                let path_part = rest.strip_prefix('@').ok_or_else(|| ModelError::Parse {
                    detail: format!("'{spec}' (table expects @<file>)"),
                })?;
                let path = base.join(path_part);
                let text = std::fs::read_to_string(&path).map_err(|e| ModelError::Io {
                    path: path.display().to_string(),
                    detail: e.to_string(),
                })?;
                let mut values = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let v: f64 = line.parse().map_err(|_| ModelError::Parse {
                        detail: format!("table line {}: '{line}' is not a number", lineno + 1),
                    })?;
                    values.push(v);
                }
                Self::table(values, format!("table:@{path_part}"))
            }
            other => Err(ModelError::Parse {
                detail: format!("unknown model kind '{other}'"),
            }),
        }
    }

    /// Canonical textual tag, matching the parse syntax.
    pub fn spec_string(&self) -> String {
        match self {
            CovarianceModel::PowerLaw { alpha } => format!("powerlaw:alpha={alpha}"),
            CovarianceModel::Fgn { hurst } => format!("fgn:H={hurst}"),
            CovarianceModel::Ar1 { phi } => format!("ar1:phi={phi}"),
            CovarianceModel::WhiteNoise => "white".to_string(),
            CovarianceModel::Table { tag, .. } => tag.clone(),
        }
    }

    /// ρ(k), with ρ(−k) = ρ(k).
    pub fn rho(&self, k: i64) -> f64 {
        let a = k.unsigned_abs() as f64;
        match self {
            CovarianceModel::PowerLaw { alpha } => (1.0 + a).powf(-alpha),
            CovarianceModel::Fgn { hurst } => {
                let two_h = 2.0 * hurst;
                0.5 * ((a + 1.0).powf(two_h) - 2.0 * a.powf(two_h) + (a - 1.0).abs().powf(two_h))
            }
            CovarianceModel::Ar1 { phi } => {
                let magnitude = phi.abs().powf(a);
                if *phi < 0.0 && k % 2 != 0 {
                    -magnitude
                } else {
                    magnitude
                }
            }
            CovarianceModel::WhiteNoise => {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            CovarianceModel::Table { values, .. } => {
                let idx = k.unsigned_abs() as usize;
                values.get(idx).copied().unwrap_or(0.0)
            }
        }
    }

    /// S_p(n) = Σ_{|k|≤n} |ρ(k)|^p = 1 + 2·Σ_{k=1..n} |ρ(k)|^p.
    /// Lags are accumulated from k = n down to 1 (small terms first).
    pub fn partial_lp_sum(&self, p: f64, n: usize) -> f64 {
        assert!(p >= 1.0 && p.is_finite(), "lp exponent must be >= 1");
        let mut acc = 0.0;
        for k in (1..=n).rev() {
            acc += self.rho(k as i64).abs().powf(p);
        }
        1.0 + 2.0 * acc
    }

    /// Does Σ_{j∈ℤ} |ρ(j)|^d converge? Closed-form answer per family.
    pub fn summability_check(&self, d: u32) -> SummabilityReport {
        assert!(d >= 1, "chaos order d must be >= 1");
        match self {
            CovarianceModel::PowerLaw { alpha } => {
                let tail_exponent = alpha * d as f64;
                SummabilityReport {
                    holds: tail_exponent > 1.0,
                    tail_exponent,
                }
            }
            CovarianceModel::Fgn { hurst } => {
                // ρ(k) ~ H(2H−1)|k|^{2H−2}; the coefficient vanishes at
                // H = 1/2, where every lag ≥ 1 is exactly zero.
                if (2.0 * hurst - 1.0).abs() < FGN_WHITE_EPS {
                    SummabilityReport {
                        holds: true,
                        tail_exponent: f64::INFINITY,
                    }
                } else {
                    let tail_exponent = d as f64 * (2.0 - 2.0 * hurst);
                    SummabilityReport {
                        holds: tail_exponent > 1.0,
                        tail_exponent,
                    }
                }
            }
            CovarianceModel::Ar1 { .. }
            | CovarianceModel::WhiteNoise
            | CovarianceModel::Table { .. } => SummabilityReport {
                holds: true,
                tail_exponent: f64::INFINITY,
            },
        }
    }

    /// Hölder interpolation between ℓ¹ and ℓ² partial sums:
    /// S_{4/3}(n)^{3/4} ≤ S_1(n)^{1/2} · S_2(n)^{1/4}.
    pub fn logconvexity_check(&self, n: usize) -> LogConvexityReport {
        let lhs = self.partial_lp_sum(4.0 / 3.0, n).powf(0.75);
        let rhs = self.partial_lp_sum(1.0, n).sqrt() * self.partial_lp_sum(2.0, n).powf(0.25);
        LogConvexityReport {
            lhs,
            rhs,
            holds: lhs <= rhs + LOGCONVEXITY_SLACK,
        }
    }
}

fn parse_param(rest: &str, name: &str) -> Result<f64, ModelError> {
    let (key, value) = rest.split_once('=').ok_or_else(|| ModelError::Parse {
        detail: format!("'{rest}' (expected {name}=<value>)"),
    })?;
    if key != name {
        return Err(ModelError::Parse {
            detail: format!("unknown parameter '{key}' (expected '{name}')"),
        });
    }
    value.trim().parse().map_err(|_| ModelError::Parse {
        detail: format!("'{value}' is not a number"),
    })
}
