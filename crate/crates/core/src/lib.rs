//! Numerical laboratory for the quantitative Breuer–Major central limit
//! theorem.
//!
//! The library simulates stationary centered Gaussian sequences with
//! prescribed covariance, pushes them through Hermite-expanded functionals
//! `F_n = n^{-1/2} Σ g(X_i)`, computes the Malliavin–Stein inner product
//! `Φ_n = ⟨DF_n, u_n⟩` together with its variance, evaluates every
//! total-variation rate bound in closed form, estimates distributional
//! distances of the standardized statistic against the normal law, and checks
//! the supporting inequalities (Gebelein, convolution sum lemmas, Stein
//! equation bounds, vanishing sequences) directly.
//!
//! Module map:
//! - [`hermite`]: coefficient-space chaos calculus (evaluation, projection,
//!   rank, shift, derivative, Mehler cross-covariance, OU semigroup, Sobolev
//!   norms).
//! - [`covariance`]: closed-form ρ(k) families and their ℓ^p partial sums.
//! - [`sampler`]: exact circulant-embedding sampling with a Cholesky oracle
//!   and a binary ensemble dump format.
//! - [`statistic`]: F_n, exact σ_n², the limit σ², Φ_n (FFT convolution with
//!   an O(n²) oracle), and variance estimates.
//! - [`bounds`]: deterministic rate-bound evaluation and the data-driven
//!   Stein bound.
//! - [`distance`]: binned total-variation and Kolmogorov estimators plus
//!   log-log rate fitting.
//! - [`ineqlab`]: Gebelein exact/Monte-Carlo checks, convolution sum lemmas,
//!   the Stein-equation solution, vanishing sequences.
//! - [`experiment`]: batched replicate drivers that never materialize more
//!   than one path batch at a time.
//! - [`verify`]: the named verification suites consumed by the CLI and the
//!   acceptance tests.
//!
//! All randomness flows through per-replicate counter-derived streams
//! ([`rng::replicate_rng`]), and every reduction uses a fixed summation
//! order, so results are bit-identical regardless of worker count.

pub mod bounds;
pub mod covariance;
pub mod distance;
pub mod experiment;
pub mod hermite;
pub mod ineqlab;
pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod statistic;
pub mod verify;

mod fft;
mod util;
