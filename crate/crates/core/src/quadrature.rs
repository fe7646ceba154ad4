//! Composite Gauss–Legendre quadrature against the standard Gaussian weight.
//!
//! The integrands that matter here are products g(x)·H_q(x)·γ(x) where g may
//! have a kink at the origin (the |x|^p family) and H_q oscillates with
//! moderate degree. Gauss–Hermite nodes would see the kink in the interior
//! and lose all spectral accuracy, so the domain [−L, L] is tiled with short
//! panels that place a boundary at 0; on each panel the integrand is analytic
//! and per-panel Gauss–Legendre converges spectrally in points-per-panel.
//!
//! With the default spec (L = 12, panel width 0.5, 16 points per panel) the
//! neglected Gaussian tail mass beyond |x| = 12 is below 2e−33 and panel
//! degree-31 exactness covers every polynomial integrand that appears up to
//! H_30 exactly; higher orders are resolved to near machine precision by
//! analyticity.

/// Panel layout for projection and norm integrals over (ℝ, γ).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    /// Integration half-width L; mass outside [−L, L] is dropped.
    pub domain_halfwidth: f64,
    /// Width of each Gauss–Legendre panel; panels tile outward from 0.
    pub panel_width: f64,
    /// Nodes per panel.
    pub points_per_panel: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            domain_halfwidth: 12.0,
            panel_width: 0.5,
            points_per_panel: 16,
        }
    }
}

impl QuadratureSpec {
    /// Panel boundaries for [0, L]; mirrored for the negative side so a
    /// boundary always sits at 0. A trailing short panel absorbs any
    /// remainder when the width does not divide L.
    fn positive_breakpoints(&self) -> Vec<f64> {
        assert!(self.domain_halfwidth >= 8.0, "domain half-width below 8 truncates real mass");
        assert!(self.panel_width > 0.0 && self.points_per_panel >= 2);
        let mut edges = vec![0.0];
        let mut x = 0.0;
        while x + self.panel_width < self.domain_halfwidth - 1e-12 {
            x += self.panel_width;
            edges.push(x);
        }
        edges.push(self.domain_halfwidth);
        edges
    }
}

/// Precomputed nodes and weights; weights already include the γ density, so
/// `integrate(f)` approximates ∫ f dγ.
#[derive(Debug, Clone)]
pub struct GaussianQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussianQuadrature {
    pub fn new(spec: &QuadratureSpec) -> Self {
        let (gl_nodes, gl_weights) = legendre_rule(spec.points_per_panel);
        let edges = spec.positive_breakpoints();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        // Negative panels first (ascending x order), then positive.
        let mut panels: Vec<(f64, f64)> = Vec::new();
        for w in edges.windows(2).rev() {
            panels.push((-w[1], -w[0]));
        }
        for w in edges.windows(2) {
            panels.push((w[0], w[1]));
        }
        for (a, b) in panels {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in gl_nodes.iter().zip(gl_weights.iter()) {
                let node = mid + half * x;
                nodes.push(node);
                weights.push(half * w * crate::normal::pdf(node));
            }
        }
        GaussianQuadrature { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫ f dγ over [−L, L].
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w * f(x))
            .collect();
        crate::util::pairwise_sum(&terms)
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on the
/// Legendre recurrence from the Chebyshev initial guess.
pub(crate) fn legendre_rule(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 2);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for k in 0..m {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_eval(m, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_eval(m, x);
        nodes[m - 1 - k] = x;
        weights[m - 1 - k] = 2.0 / ((1.0 - x * x) * d * d);
    }
    (nodes, weights)
}

/// (P_m(x), P_m'(x)) by the three-term recurrence.
fn legendre_eval(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=m {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
