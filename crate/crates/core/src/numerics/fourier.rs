//! Fourier coefficients `Ŵ_k = ∫ W(x) e^{-2πi k·x / L} dx` of grid samples.

use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct FourierMode {
    pub k: Vec<i64>,
    pub value: Complex64,
}

/// Coefficients for all `|k_i| <= k_max` (clamped to the Nyquist index `n / 2`).
pub fn fourier_modes(
    w: &[f64],
    n: usize,
    d: usize,
    cell_volume: f64,
    k_max: usize,
) -> Vec<FourierMode> {
    let kmax = k_max.min(n / 2) as i64;
    let phase =
        |k: i64, i: usize| -2.0 * PI * (k * i as i64).rem_euclid(n as i64) as f64 / n as f64;
    let mut out = Vec::new();
    if d == 1 {
        for k in -kmax..=kmax {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &v) in w.iter().enumerate() {
                acc += Complex64::from_polar(v, phase(k, i));
            }
            out.push(FourierMode {
                k: vec![k],
                value: acc * cell_volume,
            });
        }
    } else {
        for k0 in -kmax..=kmax {
            for k1 in -kmax..=kmax {
                let mut acc = Complex64::new(0.0, 0.0);
                for i0 in 0..n {
                    for i1 in 0..n {
                        let v = w[i0 * n + i1];
                        acc += Complex64::from_polar(v, phase(k0, i0) + phase(k1, i1));
                    }
                }
                out.push(FourierMode {
                    k: vec![k0, k1],
                    value: acc * cell_volume,
                });
            }
        }
    }
    out
}

/// Complex amplitude of mode `k` of a real field (same normalisation as above).
pub fn mode_amplitude(f: &[f64], n: usize, d: usize, cell_volume: f64, k: &[i64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, &v) in f.iter().enumerate() {
        let (i0, i1) = if d == 1 { (idx, 0) } else { (idx / n, idx % n) };
        let mut ph = k[0] * i0 as i64;
        if d == 2 {
            ph += k[1] * i1 as i64;
        }
        let ang = -2.0 * PI * ph.rem_euclid(n as i64) as f64 / n as f64;
        acc += Complex64::from_polar(v, ang);
    }
    acc * cell_volume
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_has_two_modes() {
        let n = 32;
        let l = 2.0;
        let dx = l / n as f64;
        let w: Vec<f64> = (0..n)
            .map(|i| 0.5 + 3.0 * (2.0 * PI * i as f64 / n as f64).cos())
            .collect();
        let modes = fourier_modes(&w, n, 1, dx, 4);
        for m in &modes {
            let expect = match m.k[0].abs() {
                0 => 0.5 * l,
                1 => 1.5 * l,
                _ => 0.0,
            };
            assert!((m.value.re - expect).abs() < 1e-12 && m.value.im.abs() < 1e-12);
        }
    }
}
