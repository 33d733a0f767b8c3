//! Free-boundary backend: in self-similar variables moving with the drift, each
//! location carries a heat equation on a moving half-line `z > γ(x, τ)`. The boundary
//! value `v`, the boundary `γ` and the first moment are found from boundary integral
//! equations, then the density is rebuilt from its heat-potential representation.
//!
//! Variables (normalised units, `τ_c = σ = 1`): `y = e^t s`, `τ = (e^{2t} - 1)/2`,
//! `α = e^{-t}`, `u(z, τ) = α ρ(α y, t)` with `z = y + γ`.

mod gamma;
mod mesh;
mod reconstruct;
mod solver;

pub use gamma::{integrate_gamma, GammaPath};
pub use mesh::{ProductWeights, TauMesh};
pub use reconstruct::{reconstruct_u, u_at, SelfsimilarField};
pub use solver::{BoundaryTriple, StefanConfig, StefanRun, StefanSolver, Track};

use crate::model::{DensityField, RescaleMap};
use crate::numerics::PiecewiseLinear;

/// Self-similar time of normalised time `t`.
pub fn tau_of_t(t: f64) -> f64 {
    0.5 * (2.0 * t).exp_m1()
}

pub fn t_of_tau(tau: f64) -> f64 {
    0.5 * (2.0 * tau).ln_1p()
}

/// `α(τ) = (2τ + 1)^{-1/2} = e^{-t}`.
pub fn alpha(tau: f64) -> f64 {
    1.0 / (2.0 * tau + 1.0).sqrt()
}

pub fn z_of_s(s: f64, t: f64, gamma: f64) -> f64 {
    s * t.exp() + gamma
}

pub fn s_of_z(z: f64, t: f64, gamma: f64) -> f64 {
    (z - gamma) * (-t).exp()
}

/// Initial data `u⁰(z) = ρ̃⁰(z)` per location, as a piecewise-linear function through
/// the boundary trace, the cell centres and zero at `s_max`, rescaled to the exact
/// per-location mass.
pub fn to_selfsimilar(rho: &DensityField, map: &RescaleMap) -> Vec<PiecewiseLinear> {
    let norm = map.to_normalized(rho);
    let target = norm.target_mass();
    let a = &norm.activity;
    let mut nodes = Vec::with_capacity(a.n_s + 2);
    nodes.push(0.0);
    nodes.extend(a.centers());
    nodes.push(a.s_max);
    norm.rows()
        .map(|r| {
            let mut values = Vec::with_capacity(nodes.len());
            values.push((1.5 * r[0] - 0.5 * r[1]).max(0.0));
            values.extend_from_slice(r);
            values.push(0.0);
            let pl = PiecewiseLinear::new(nodes.clone(), values);
            let mass = pl.mass();
            if mass > 0.0 {
                PiecewiseLinear::new(
                    nodes.clone(),
                    pl.values.iter().map(|v| v * target / mass).collect(),
                )
            } else {
                pl
            }
        })
        .collect()
}
