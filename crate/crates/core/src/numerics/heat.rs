//! One-dimensional heat kernel, its ξ-derivative, and the closed-form half-line
//! moments used by the Stefan boundary integral equations.

use super::special::{erf_diff, erfc, FRAC_1_SQRT_PI};

/// `G(z, τ, ξ, η)`; requires `τ > η`.
#[inline]
pub fn heat_kernel(z: f64, tau: f64, xi: f64, eta: f64) -> f64 {
    let t = tau - eta;
    debug_assert!(t > 0.0);
    let d = z - xi;
    (-d * d / (4.0 * t)).exp() * 0.5 * FRAC_1_SQRT_PI / t.sqrt()
}

/// `∂G/∂ξ = (z - ξ) / (2(τ - η)) · G`.
#[inline]
pub fn heat_kernel_dxi(z: f64, tau: f64, xi: f64, eta: f64) -> f64 {
    (z - xi) / (2.0 * (tau - eta)) * heat_kernel(z, tau, xi, eta)
}

/// Zeroth and first half-line moments `(∫_γ^∞ G dz, ∫_γ^∞ z G dz)`.
pub fn heat_kernel_moments(gamma: f64, tau: f64, xi: f64, eta: f64) -> (f64, f64) {
    let t = tau - eta;
    let m0 = 0.5 * erfc((gamma - xi) / (2.0 * t.sqrt()));
    (m0, brick1(gamma, tau, xi, eta))
}

/// `∫_{γ_τ}^∞ z G(z, τ, ξ, η) dz` in closed form.
#[inline]
pub fn brick1(gamma_tau: f64, tau: f64, xi: f64, eta: f64) -> f64 {
    let t = tau - eta;
    let u = (xi - gamma_tau) / (2.0 * t.sqrt());
    (t.sqrt() * FRAC_1_SQRT_PI) * (-u * u).exp() + 0.5 * xi * erfc(-u)
}

/// `∫_{γ_τ}^∞ z ∂G/∂ξ(z, τ, γ_η, η) dz` in closed form.
#[inline]
pub fn brick2(gamma_tau: f64, tau: f64, gamma_eta: f64, eta: f64) -> f64 {
    let t = tau - eta;
    let d = gamma_tau - gamma_eta;
    gamma_tau * (-d * d / (4.0 * t)).exp() * 0.5 * FRAC_1_SQRT_PI / t.sqrt()
        + 0.5 * erfc(d / (2.0 * t.sqrt()))
}

/// Continuous piecewise-linear function on ascending nodes, zero outside.
#[derive(Clone, Debug)]
pub struct PiecewiseLinear {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    slopes: Vec<f64>,
    /// prefix sums of `∫ f` and `∫ ξ f` over pieces
    cum0: Vec<f64>,
    cum1: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(nodes.len(), values.len());
        assert!(nodes.len() >= 2);
        let n = nodes.len();
        let mut slopes = Vec::with_capacity(n - 1);
        let mut cum0 = vec![0.0; n];
        let mut cum1 = vec![0.0; n];
        for j in 0..n - 1 {
            let (a, b) = (nodes[j], nodes[j + 1]);
            let (fa, fb) = (values[j], values[j + 1]);
            let h = b - a;
            slopes.push((fb - fa) / h);
            cum0[j + 1] = cum0[j] + 0.5 * h * (fa + fb);
            cum1[j + 1] = cum1[j] + h * (fa * (2.0 * a + b) + fb * (a + 2.0 * b)) / 6.0;
        }
        PiecewiseLinear {
            nodes,
            values,
            slopes,
            cum0,
            cum1,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x < self.nodes[0] || x > self.nodes[n - 1] {
            return 0.0;
        }
        let j = match self.nodes.partition_point(|&v| v <= x) {
            0 => 0,
            k => (k - 1).min(n - 2),
        };
        self.values[j] + self.slopes[j] * (x - self.nodes[j])
    }

    pub fn mass(&self) -> f64 {
        *self.cum0.last().unwrap()
    }

    pub fn first_moment(&self) -> f64 {
        *self.cum1.last().unwrap()
    }

    /// `∫ G(z, T, ξ, 0) f(ξ) dξ`, exact.
    pub fn heat_convolve(&self, z: f64, t: f64) -> f64 {
        let kappa = 2.0 * t.sqrt();
        let cut = 7.5 * kappa;
        let lo = self
            .nodes
            .partition_point(|&v| v < z - cut)
            .saturating_sub(1);
        let hi = (self.nodes.partition_point(|&v| v <= z + cut) + 1).min(self.nodes.len());
        let mut acc = 0.0;
        let mut ua = (self.nodes[lo] - z) / kappa;
        let mut ea = (-ua * ua).exp();
        for j in lo..hi.saturating_sub(1) {
            let ub = (self.nodes[j + 1] - z) / kappa;
            let eb = (-ub * ub).exp();
            let q = self.slopes[j];
            let p = self.values[j] + q * (z - self.nodes[j]);
            acc += p * 0.5 * erf_diff(ua, ub) - q * kappa * 0.5 * FRAC_1_SQRT_PI * (eb - ea);
            ua = ub;
            ea = eb;
        }
        acc
    }

    /// `∫ [∫_c^∞ (z - c) G(z, T, ξ, 0) dz] f(ξ) dξ`, exact.
    pub fn shifted_first_moment(&self, c: f64, t: f64) -> f64 {
        let kappa = 2.0 * t.sqrt();
        let cut = 7.0 * kappa;
        let n = self.nodes.len();
        let lo = self
            .nodes
            .partition_point(|&v| v < c - cut)
            .saturating_sub(1);
        let hi = (self.nodes.partition_point(|&v| v <= c + cut) + 1).min(n);
        let mut acc = 0.0;
        let h1 = |u: f64, ec: f64, e: f64| 0.5 * u * u * ec + 0.5 * u * e * FRAC_1_SQRT_PI;
        let h2 = |u: f64, ec: f64, e: f64| {
            u * u * u / 3.0 * ec + e * (2.0 * u * u - 1.0) / 6.0 * FRAC_1_SQRT_PI
        };
        let mut ua = (self.nodes[lo] - c) / kappa;
        let mut eca = erfc(-ua);
        let mut ea = (-ua * ua).exp();
        for j in lo..hi.saturating_sub(1) {
            let ub = (self.nodes[j + 1] - c) / kappa;
            let ecb = erfc(-ub);
            let eb = (-ub * ub).exp();
            let q = self.slopes[j];
            let p = self.values[j] + q * (c - self.nodes[j]);
            let dh1 = h1(ub, ecb, eb) - h1(ua, eca, ea) + 0.25 * erf_diff(ua, ub);
            let dh2 = h2(ub, ecb, eb) - h2(ua, eca, ea);
            acc += 0.5 * kappa * kappa * (p * dh1 + q * kappa * dh2);
            ua = ub;
            eca = ecb;
            ea = eb;
        }
        // far right: the inner moment equals ξ - c
        if hi < n {
            let k = hi - 1;
            acc += (self.cum1[n - 1] - self.cum1[k]) - c * (self.cum0[n - 1] - self.cum0[k]);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::adaptive_with_breaks;

    fn oracle_m1(c: f64, t: f64, xi: f64) -> f64 {
        let w = 2.0 * t.sqrt();
        let lo = c.max(xi - 40.0 * w);
        let hi = (xi + 40.0 * w).max(lo + w);
        if lo >= hi {
            return 0.0;
        }
        let mid = xi.clamp(lo, hi);
        adaptive_with_breaks(
            |z| z * heat_kernel(z, t, xi, 0.0),
            &[lo, mid, hi],
            1e-16,
            1e-13,
        )
    }

    #[test]
    fn kernel_has_unit_mass() {
        let m = adaptive_with_breaks(
            |z| heat_kernel(z, 0.3, 0.4, 0.1),
            &[-10.0, 0.4, 10.0],
            1e-16,
            1e-14,
        );
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bricks_against_quadrature() {
        for &(c, t, xi) in &[
            (0.0, 0.5, 0.3),
            (-1.2, 0.01, -1.0),
            (2.0, 3.0, -1.0),
            (0.5, 1e-3, 0.52),
        ] {
            let b = brick1(c, t, xi, 0.0);
            let q = oracle_m1(c, t, xi);
            assert!((b - q).abs() <= 1e-10 * (1.0 + q.abs()), "{b} {q}");
        }
        for &(gt, ge, t) in &[(0.0, 0.2, 0.5), (1.0, 0.8, 0.05), (-2.0, -1.0, 2.0)] {
            let b = brick2(gt, t, ge, 0.0);
            let w = 2.0 * t.sqrt();
            let q = adaptive_with_breaks(
                |z| z * heat_kernel_dxi(z, t, ge, 0.0),
                &[gt, ge.max(gt), ge.max(gt) + 40.0 * w],
                1e-16,
                1e-13,
            );
            assert!((b - q).abs() <= 1e-10 * (1.0 + q.abs()), "{b} {q}");
        }
    }

    fn sample_pl() -> PiecewiseLinear {
        let nodes: Vec<f64> = (0..=80)
            .map(|i| 0.05 * i as f64 + if i > 0 { 0.01 } else { 0.0 })
            .collect();
        let values: Vec<f64> = nodes
            .iter()
            .map(|&x| (-(x - 1.2f64).powi(2)).exp() * (1.0 + 0.3 * x))
            .collect();
        PiecewiseLinear::new(nodes, values)
    }

    #[test]
    fn piecewise_moments_match_quadrature() {
        let f = sample_pl();
        let breaks = f.nodes.clone();
        let m = adaptive_with_breaks(|x| f.eval(x), &breaks, 1e-16, 1e-14);
        assert!((m - f.mass()).abs() < 1e-13);
        let m1 = adaptive_with_breaks(|x| x * f.eval(x), &breaks, 1e-16, 1e-14);
        assert!((m1 - f.first_moment()).abs() < 1e-13);
        for &(z, t) in &[(0.0, 1e-3), (1.0, 0.2), (-0.5, 2.5), (4.1, 0.01)] {
            let exact = f.heat_convolve(z, t);
            let q = adaptive_with_breaks(
                |x| heat_kernel(z, t, x, 0.0) * f.eval(x),
                &breaks,
                1e-17,
                1e-13,
            );
            assert!((exact - q).abs() < 1e-12, "z={z} t={t}: {exact} vs {q}");
        }
        for &(c, t) in &[
            (0.0, 1e-3),
            (0.7, 0.2),
            (-0.5, 2.5),
            (1.3, 0.01),
            (-3.0, 0.05),
        ] {
            let exact = f.shifted_first_moment(c, t);
            let q = adaptive_with_breaks(
                |x| (brick1(c, t, x, 0.0) - c * heat_kernel_moments(c, t, x, 0.0).0) * f.eval(x),
                &breaks,
                1e-17,
                1e-13,
            );
            assert!((exact - q).abs() < 1e-11, "c={c} t={t}: {exact} vs {q}");
        }
    }
}
