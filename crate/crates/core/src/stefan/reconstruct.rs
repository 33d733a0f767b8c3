use super::solver::{StefanRun, Track};
use crate::numerics::heat::heat_kernel_dxi;
use crate::numerics::quad::gauss_legendre;
use crate::numerics::PiecewiseLinear;
use serde::Serialize;
use std::sync::OnceLock;

const PANEL_POINTS: usize = 20;

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_POINTS))
}

fn locate(len: usize, dtau: f64, eta: f64) -> (usize, f64) {
    let f = (eta / dtau).max(0.0);
    let i = (f.floor() as usize).min(len - 2);
    (i, f - i as f64)
}

/// `v` between nodes, linear.
pub(crate) fn v_at(tr: &Track, dtau: f64, eta: f64) -> f64 {
    if tr.v.len() == 1 {
        return tr.v[0];
    }
    let (i, w) = locate(tr.v.len(), dtau, eta);
    tr.v[i] * (1.0 - w) + tr.v[i + 1] * w
}

/// `γ` between nodes, cubic Hermite with slopes `-Ψ`.
pub(crate) fn gamma_at(tr: &Track, dtau: f64, eta: f64) -> f64 {
    if tr.gamma.len() == 1 {
        return tr.gamma[0];
    }
    let (i, w) = locate(tr.gamma.len(), dtau, eta);
    let (g0, g1) = (tr.gamma[i], tr.gamma[i + 1]);
    let (d0, d1) = (-tr.psi[i] * dtau, -tr.psi[i + 1] * dtau);
    let w2 = w * w;
    let w3 = w2 * w;
    g0 * (2.0 * w3 - 3.0 * w2 + 1.0)
        + d0 * (w3 - 2.0 * w2 + w)
        + g1 * (-2.0 * w3 + 3.0 * w2)
        + d1 * (w3 - w2)
}

/// `u(z, τ) = ∫ G(z, τ, ξ, 0) u⁰(ξ) dξ + ∫_0^τ ∂G/∂ξ(z, τ, γ(η), η) v(η) dη` for `z > γ(τ)`.
///
/// The boundary integral is split into panels `[T, 2T]` in `T = τ - η`, starting where the
/// kernel is below `e^{-500}`; each panel is smooth at its own scale and gets Gauss-Legendre.
pub fn u_at(u0: &PiecewiseLinear, tr: &Track, dtau: f64, tau: f64, z: f64) -> f64 {
    if tau <= 0.0 {
        return u0.eval(z);
    }
    let mut u = u0.heat_convolve(z, tau);
    let delta = z - gamma_at(tr, dtau, tau);
    let mut lo = (delta * delta / 2000.0).max(tau * 1e-15);
    let (gx, gw) = rule();
    while lo < tau {
        let hi = if 2.0 * lo > 0.75 * tau { tau } else { 2.0 * lo };
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (x, w) in gx.iter().zip(gw) {
            let t = mid + half * x;
            let eta = tau - t;
            acc += w * heat_kernel_dxi(z, tau, gamma_at(tr, dtau, eta), eta) * v_at(tr, dtau, eta);
        }
        u += acc * half;
        lo = hi;
    }
    u
}

/// Self-similar profile of one population at one `τ`, on uniform grids `z ∈ [γ(x), z_max]`.
#[derive(Clone, Debug, Serialize)]
pub struct SelfsimilarField {
    pub tau: f64,
    pub gamma: Vec<f64>,
    pub z_max: f64,
    pub n_z: usize,
    /// `u[x][j]` at `z = γ(x) + j (z_max - γ(x)) / (n_z - 1)`; the boundary column holds `v`.
    pub u: Vec<Vec<f64>>,
}

impl SelfsimilarField {
    pub fn z(&self, x: usize, j: usize) -> f64 {
        let g = self.gamma[x];
        g + j as f64 * (self.z_max - g) / (self.n_z - 1) as f64
    }

    /// Trapezoid mass per location.
    pub fn mass(&self, x: usize) -> f64 {
        let h = (self.z_max - self.gamma[x]) / (self.n_z - 1) as f64;
        let row = &self.u[x];
        h * (row.iter().sum::<f64>() - 0.5 * (row[0] + row[self.n_z - 1]))
    }
}

/// Rebuild `u^β(·, ·, τ)` from the converged boundary data.
pub fn reconstruct_u(
    run: &StefanRun,
    population: usize,
    tau: f64,
    z_max: f64,
    n_z: usize,
) -> SelfsimilarField {
    let nx = run.spatial.cells();
    let mut gamma = Vec::with_capacity(nx);
    let mut u = Vec::with_capacity(nx);
    for x in 0..nx {
        let r = population * nx + x;
        let tr = &run.tracks[r];
        let g = gamma_at(tr, run.dtau, tau);
        let h = (z_max - g) / (n_z - 1) as f64;
        let mut row = Vec::with_capacity(n_z);
        row.push(if tau > 0.0 {
            v_at(tr, run.dtau, tau)
        } else {
            run.u0[r].eval(0.0)
        });
        for j in 1..n_z {
            row.push(u_at(&run.u0[r], tr, run.dtau, tau, g + j as f64 * h));
        }
        gamma.push(g);
        u.push(row);
    }
    SelfsimilarField {
        tau,
        gamma,
        z_max,
        n_z,
        u,
    }
}
