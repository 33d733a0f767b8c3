//! Periodic convolution on uniform tori in one or two dimensions.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// `(W * f)[i] = Σ_j W[i - j] f[j] · cell_volume`, by direct summation.
pub fn convolve_direct(w: &[f64], f: &[f64], n: usize, d: usize, cell_volume: f64) -> Vec<f64> {
    let total = n.pow(d as u32);
    let mut out = vec![0.0; total];
    for i in 0..total {
        let mut acc = 0.0;
        for j in 0..total {
            let k = if d == 1 {
                (i + n - j) % n
            } else {
                let (i0, i1) = (i / n, i % n);
                let (j0, j1) = (j / n, j % n);
                ((i0 + n - j0) % n) * n + (i1 + n - j1) % n
            };
            acc += w[k] * f[j];
        }
        out[i] = acc * cell_volume;
    }
    out
}

/// FFT-based convolution with a fixed kernel.
pub struct PeriodicConvolver {
    n: usize,
    d: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    w_hat: Vec<Complex64>,
}

impl std::fmt::Debug for PeriodicConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicConvolver")
            .field("n", &self.n)
            .field("d", &self.d)
            .finish()
    }
}

impl Clone for PeriodicConvolver {
    fn clone(&self) -> Self {
        PeriodicConvolver {
            n: self.n,
            d: self.d,
            fwd: self.fwd.clone(),
            inv: self.inv.clone(),
            w_hat: self.w_hat.clone(),
        }
    }
}

impl PeriodicConvolver {
    pub fn new(w: &[f64], n: usize, d: usize, cell_volume: f64) -> Self {
        assert!(d == 1 || d == 2);
        assert_eq!(w.len(), n.pow(d as u32));
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut c = Self {
            n,
            d,
            fwd,
            inv,
            w_hat: Vec::new(),
        };
        let mut buf: Vec<Complex64> = w
            .iter()
            .map(|&v| Complex64::new(v * cell_volume, 0.0))
            .collect();
        c.transform(&mut buf, false);
        c.w_hat = buf;
        c
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let n = self.n;
        if self.d == 1 {
            plan.process(buf);
            return;
        }
        for row in buf.chunks_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = buf[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                buf[i * n + j] = col[i];
            }
        }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        for (b, w) in buf.iter_mut().zip(&self.w_hat) {
            *b *= w;
        }
        self.transform(&mut buf, true);
        let scale = 1.0 / buf.len() as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

/// Roll a periodic field by an integer offset per dimension: `out[i] = f[i - shift]`.
pub fn roll(f: &[f64], n: usize, d: usize, shift: &[i64]) -> Vec<f64> {
    let m = |i: usize, s: i64| ((i as i64 - s).rem_euclid(n as i64)) as usize;
    if d == 1 {
        (0..n).map(|i| f[m(i, shift[0])]).collect()
    } else {
        let mut out = vec![0.0; n * n];
        for i0 in 0..n {
            for i1 in 0..n {
                out[i0 * n + i1] = f[m(i0, shift[0]) * n + m(i1, shift[1])];
            }
        }
        out
    }
}
