//! Unitary DFT (1/sqrt(N) in both directions) along the innermost axis.
//!
//! [`dft_reference`] is the direct O(N^2) sum and serves as the oracle;
//! [`Fft`] wraps planned FFTs for the simulation hot path.

use crate::grid::ComplexGrid;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::sync::Arc;

/// Unitary DFT matrix, row-major: `w[k * n + t] = exp(-+2 pi i k t / n) / sqrt(n)`.
pub fn dft_matrix(n: usize, inverse: bool) -> Vec<Complex64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    let scale = 1.0 / (n as f64).sqrt();
    let mut w = Vec::with_capacity(n * n);
    for k in 0..n {
        for t in 0..n {
            // Reduce k*t mod n first so large products keep full precision.
            let phase = sign * 2.0 * PI * ((k * t) % n) as f64 / n as f64;
            w.push(Complex64::from_polar(scale, phase));
        }
    }
    w
}

/// Direct-sum DFT/IDFT applied to every row of the innermost axis.
pub fn dft_reference(x: &ComplexGrid, inverse: bool) -> ComplexGrid {
    let n = x.row_len();
    let w = dft_matrix(n, inverse);
    let mut out = ComplexGrid::zeros(x.dims());
    for (src, dst) in x.rows().zip(out.rows_mut()) {
        for (k, y) in dst.iter_mut().enumerate() {
            *y = w[k * n..(k + 1) * n].iter().zip(src).map(|(a, b)| a * b).sum();
        }
    }
    out
}

/// Planned unitary FFT of a fixed size.
#[derive(Clone)]
pub struct Fft {
    n: usize,
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Fft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft").field("n", &self.n).finish()
    }
}

impl Fft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place transform of consecutive length-`n` rows.
    pub fn process(&self, rows: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(rows.len() % self.n, 0);
        let plan = if inverse { &self.inverse } else { &self.forward };
        plan.process(rows);
        for z in rows.iter_mut() {
            *z *= self.scale;
        }
    }

    pub fn transform(&self, x: &ComplexGrid, inverse: bool) -> ComplexGrid {
        let mut out = x.clone();
        self.process(out.as_mut_slice(), inverse);
        out
    }
}
