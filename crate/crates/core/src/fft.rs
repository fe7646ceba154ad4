//! Shared FFT plumbing: circulant spectra and fast Toeplitz
//! matrix–vector products via circular embedding.
//!
//! rustfft transforms are unnormalized (inverse(forward(x)) = len·x), so the
//! 1/M factors live here, next to the transforms they belong to.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) fn plan_forward(len: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(len)
}

pub(crate) fn plan_inverse(len: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_inverse(len)
}

/// Eigenvalues of the circulant matrix with the given first row, i.e. the
/// real part of its DFT. For a symmetric row (row[j] = row[M−j]) the
/// imaginary parts vanish up to roundoff.
pub(crate) fn circulant_eigenvalues(first_row: &[f64]) -> Vec<f64> {
    let m = first_row.len();
    let fft = plan_forward(m);
    let mut buf: Vec<Complex<f64>> = first_row.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(&mut buf, &mut scratch);
    buf.iter().map(|c| c.re).collect()
}

/// Fast y_i = Σ_{j=0..n−1} kernel[|i−j|]·b_j for i = 0..n−1, by embedding
/// the symmetric Toeplitz matrix into a circulant of power-of-two size
/// M ≥ 2n and caching the kernel spectrum. One plan, many right-hand sides.
pub(crate) struct ToeplitzConvolver {
    n: usize,
    m: usize,
    kernel_hat: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Per-thread scratch buffers for [`ToeplitzConvolver::apply`].
pub(crate) struct ConvolverScratch {
    buf: Vec<Complex<f64>>,
    fft_scratch: Vec<Complex<f64>>,
}

impl ToeplitzConvolver {
    /// `kernel[l]` is the value at offset |i−j| = l; `kernel.len()` must be n.
    pub fn new(kernel: &[f64]) -> Self {
        let n = kernel.len();
        assert!(n >= 1);
        let m = (2 * n).next_power_of_two();
        let forward = plan_forward(m);
        let inverse = plan_inverse(m);
        let mut row = vec![Complex::new(0.0, 0.0); m];
        for (l, &c) in kernel.iter().enumerate() {
            row[l] = Complex::new(c, 0.0);
            if l > 0 {
                row[m - l] = Complex::new(c, 0.0);
            }
        }
        let mut scratch = vec![Complex::new(0.0, 0.0); forward.get_inplace_scratch_len()];
        forward.process_with_scratch(&mut row, &mut scratch);
        ToeplitzConvolver {
            n,
            m,
            kernel_hat: row,
            forward,
            inverse,
        }
    }

    pub fn make_scratch(&self) -> ConvolverScratch {
        let fft_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        ConvolverScratch {
            buf: vec![Complex::new(0.0, 0.0); self.m],
            fft_scratch: vec![Complex::new(0.0, 0.0); fft_len],
        }
    }

    /// Writes the n products into `out`.
    pub fn apply(&self, b: &[f64], scratch: &mut ConvolverScratch, out: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        assert_eq!(out.len(), self.n);
        let buf = &mut scratch.buf;
        for slot in buf.iter_mut() {
            *slot = Complex::new(0.0, 0.0);
        }
        for (slot, &x) in buf.iter_mut().zip(b.iter()) {
            slot.re = x;
        }
        self.forward
            .process_with_scratch(buf, &mut scratch.fft_scratch);
        for (slot, k) in buf.iter_mut().zip(self.kernel_hat.iter()) {
            *slot *= k;
        }
        self.inverse
            .process_with_scratch(buf, &mut scratch.fft_scratch);
        let norm = 1.0 / self.m as f64;
        for (o, c) in out.iter_mut().zip(buf.iter()) {
            *o = c.re * norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn naive_dft_real(row: &[f64]) -> Vec<f64> {
        let m = row.len();
        (0..m)
            .map(|j| {
                row.iter()
                    .enumerate()
                    .map(|(l, &x)| {
                        let angle = -2.0 * std::f64::consts::PI * (j * l) as f64 / m as f64;
                        x * angle.cos()
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn eigenvalues_match_naive_dft() {
        let row = [2.0, 0.7, -0.3, 0.1, 0.05, 0.1, -0.3, 0.7];
        let fast = circulant_eigenvalues(&row);
        let slow = naive_dft_real(&row);
        for (f, s) in fast.iter().zip(slow.iter()) {
            assert_abs_diff_eq!(f, s, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_row_has_flat_spectrum() {
        let mut row = vec![0.0; 16];
        row[0] = 1.0;
        for lambda in circulant_eigenvalues(&row) {
            assert_abs_diff_eq!(lambda, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn convolver_matches_direct_toeplitz_product() {
        let kernel = [1.0, 0.5, 0.25, 0.125, 0.0625];
        let b = [0.3, -1.2, 0.8, 2.0, -0.5];
        let n = kernel.len();
        let conv = ToeplitzConvolver::new(&kernel);
        let mut scratch = conv.make_scratch();
        let mut out = vec![0.0; n];
        conv.apply(&b, &mut scratch, &mut out);
        for i in 0..n {
            let direct: f64 = (0..n).map(|j| kernel[i.abs_diff(j)] * b[j]).sum();
            assert_abs_diff_eq!(out[i], direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn convolver_reusable_across_right_hand_sides() {
        let kernel = [1.0, -0.4, 0.16];
        let conv = ToeplitzConvolver::new(&kernel);
        let mut scratch = conv.make_scratch();
        let mut out = vec![0.0; 3];
        for b in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, -1.0, 0.5]] {
            conv.apply(&b, &mut scratch, &mut out);
            for i in 0..3usize {
                let direct: f64 = (0..3).map(|j| kernel[i.abs_diff(j)] * b[j]).sum();
                assert_abs_diff_eq!(out[i], direct, epsilon = 1e-13);
            }
        }
    }
}
