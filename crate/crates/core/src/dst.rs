//! Orthonormal type-I discrete sine transform via a real odd extension and an FFT.
//!
//! `S[m][j] = sqrt(2 / (n + 1)) sin(pi (m + 1)(j + 1) / (n + 1))` for
//! `0 <= m, j < n`. The matrix is symmetric and orthogonal, so the transform
//! is its own inverse.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Dst1 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Clone for Dst1 {
    fn clone(&self) -> Self {
        Self { n: self.n, fft: Arc::clone(&self.fft), buf: self.buf.clone(), scratch: self.scratch.clone() }
    }
}

impl std::fmt::Debug for Dst1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dst1").field("n", &self.n).finish()
    }
}

impl Dst1 {
    pub fn new(n: usize) -> Self {
        let len = 2 * (n + 1);
        let fft = FftPlanner::new().plan_fft_forward(len);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Self { n, fft, buf: vec![Complex64::new(0.0, 0.0); len], scratch }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Eigenvalues of `-D_yy` (Dirichlet, spacing `h`) on the transform's basis vectors.
    pub fn dirichlet_eigenvalues(n: usize, h: f64) -> Vec<f64> {
        (1..=n).map(|m| 4.0 / (h * h) * (PI * m as f64 / (2.0 * (n + 1) as f64)).sin().powi(2)).collect()
    }

    /// Transforms `x` (length `n`) in place.
    pub fn transform(&mut self, x: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        let zero = Complex64::new(0.0, 0.0);
        self.buf[0] = zero;
        self.buf[n + 1] = zero;
        for (j, &v) in x.iter().enumerate() {
            self.buf[j + 1] = Complex64::new(v, 0.0);
            self.buf[2 * n + 1 - j] = Complex64::new(-v, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let norm = -0.5 * (2.0 / (n + 1) as f64).sqrt();
        for (m, out) in x.iter_mut().enumerate() {
            *out = norm * self.buf[m + 1].im;
        }
    }

    /// Transforms each contiguous chunk of length `n`.
    pub fn transform_rows(&mut self, data: &mut [f64]) {
        let n = self.n;
        for row in data.chunks_exact_mut(n) {
            self.transform(row);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let c = (2.0 / (n + 1) as f64).sqrt();
        (0..n)
            .map(|m| {
                c * x.iter().enumerate().map(|(j, v)| v * (PI * ((m + 1) * (j + 1)) as f64 / (n + 1) as f64).sin()).sum::<f64>()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn agrees_with_direct_sum_and_inverts(x in proptest::collection::vec(-5.0f64..5.0, 1..80)) {
            let mut d = Dst1::new(x.len());
            let mut y = x.clone();
            d.transform(&mut y);
            for (a, b) in y.iter().zip(naive(&x)) {
                prop_assert!((a - b).abs() < 1e-11);
            }
            d.transform(&mut y);
            for (a, b) in y.iter().zip(&x) {
                prop_assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn basis_vectors_diagonalize_the_second_difference() {
        let n = 15;
        let h = 0.1;
        let lam = Dst1::dirichlet_eigenvalues(n, h);
        let mut d = Dst1::new(n);
        for m in 0..n {
            let mut e = vec![0.0; n];
            e[m] = 1.0;
            d.transform(&mut e);
            for j in 0..n {
                let left = if j > 0 { e[j - 1] } else { 0.0 };
                let right = if j + 1 < n { e[j + 1] } else { 0.0 };
                let dyy = (left - 2.0 * e[j] + right) / (h * h);
                assert!((dyy + lam[m] * e[j]).abs() < 1e-9);
            }
        }
    }
}
