//! Spatially homogeneous stationary states `ρ∞ ∝ exp(-(s - Φ₀)² / (2σ))` on `s >= 0`.

use crate::direct::{DirectSolver, SolverConfig};
use crate::error::{Error, Result};
use crate::model::input::InputForm;
use crate::model::{ActivityGrid, DensityField, ModelParams, ModulationKind, SpatialGrid};
use crate::numerics::special::{erfc, gaussian_hazard, FRAC_1_SQRT_PI};
use serde::Serialize;
use std::f64::consts::PI;

/// Moments of the truncated Gaussian at drift `Φ₀`, normalised to mass `1/L^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianStats {
    pub phi0: f64,
    /// `Z_ρ = L^d ∫_0^∞ exp(-(s - Φ₀)²/(2σ)) ds`
    pub z_rho: f64,
    /// `ρ̄∞ = ∫ s ρ∞ ds`
    pub mean: f64,
    /// `M∞ = ∫ (s - L^d ρ̄∞)² ρ∞ ds`
    pub m_inf: f64,
}

/// `g(η) = 1 - (2/√π) h(η) [h(η)/√π + η]` with `h = e^{-η²}/(1 + erf η)`; `M∞/σ = g(Φ₀/√(2σ)) / L^d`.
pub fn variance_factor(eta: f64) -> f64 {
    let k = FRAC_1_SQRT_PI * gaussian_hazard(eta);
    1.0 - 2.0 * k * (k + eta)
}

pub fn truncated_gaussian_stats(phi0: f64, sigma: f64, measure: f64) -> GaussianStats {
    let eta = phi0 / (2.0 * sigma).sqrt();
    let z_rho = measure * (PI * sigma / 2.0).sqrt() * erfc(-eta);
    // mean of the normalised truncated law
    let mu = phi0 + (2.0 * sigma).sqrt() * FRAC_1_SQRT_PI * gaussian_hazard(eta);
    GaussianStats {
        phi0,
        z_rho,
        mean: mu / measure,
        m_inf: sigma * variance_factor(eta) / measure,
    }
}

/// Same moments for the profile sampled at cell centres and normalised by the midpoint sum.
pub fn discrete_gaussian_stats(
    phi0: f64,
    sigma: f64,
    measure: f64,
    grid: &ActivityGrid,
) -> GaussianStats {
    let ds = grid.ds();
    let expo: Vec<f64> = (0..grid.n_s)
        .map(|j| -(grid.center(j) - phi0).powi(2) / (2.0 * sigma))
        .collect();
    let top = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = expo.iter().map(|e| (e - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let mu: f64 = w
        .iter()
        .enumerate()
        .map(|(j, w)| w * grid.center(j))
        .sum::<f64>()
        / z;
    let var: f64 = w
        .iter()
        .enumerate()
        .map(|(j, w)| w * (grid.center(j) - mu).powi(2))
        .sum::<f64>()
        / z;
    GaussianStats {
        phi0,
        z_rho: measure * z * ds * top.exp(),
        mean: mu / measure,
        m_inf: var / measure,
    }
}

/// Homogeneous stationary state.
#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumState {
    pub phi0: f64,
    /// `Φ'` at the stationary drift argument
    pub phi0_prime: f64,
    pub mean: f64,
    pub m_inf: f64,
    pub z_rho: f64,
    pub sigma: f64,
    pub measure: f64,
    /// activity grid when the moments are the discrete (grid-consistent) ones
    #[serde(skip)]
    pub grid: Option<ActivityGrid>,
    /// further roots of the self-consistency equation, if any
    pub other_roots: Vec<f64>,
}

impl EquilibriumState {
    fn from_stats(st: GaussianStats, p: &ModelParams, grid: Option<&ActivityGrid>) -> Self {
        let arg = p.kernel.integral() * st.mean + p.input.eval(0.0);
        EquilibriumState {
            phi0: st.phi0,
            phi0_prime: p.phi.deriv(arg),
            mean: st.mean,
            m_inf: st.m_inf,
            z_rho: st.z_rho,
            sigma: p.sigma,
            measure: p.measure(),
            grid: grid.cloned(),
            other_roots: Vec::new(),
        }
    }

    /// `ρ∞` sampled at the cell centres of `activity`, per-x mass `1/L^d`.
    pub fn profile(&self, spatial: &SpatialGrid, activity: &ActivityGrid) -> DensityField {
        let phi0 = self.phi0;
        let sigma = self.sigma;
        let top = |s: f64| -(s - phi0).powi(2) / (2.0 * sigma);
        let shift = (0..activity.n_s)
            .map(|j| top(activity.center(j)))
            .fold(f64::NEG_INFINITY, f64::max);
        DensityField::from_fn(spatial, activity, |_, s| (top(s) - shift).exp())
            .expect("positive profile")
    }
}

fn stats_for(phi0: f64, p: &ModelParams, grid: Option<&ActivityGrid>) -> GaussianStats {
    match grid {
        Some(g) => discrete_gaussian_stats(phi0, p.sigma, p.measure(), g),
        None => truncated_gaussian_stats(phi0, p.sigma, p.measure()),
    }
}

fn residual(phi0: f64, p: &ModelParams, grid: Option<&ActivityGrid>) -> f64 {
    let st = stats_for(phi0, p, grid);
    phi0 - p
        .phi
        .eval(p.kernel.integral() * st.mean + p.input.eval(0.0))
}

fn refine(lo0: f64, hi0: f64, p: &ModelParams, grid: Option<&ActivityGrid>) -> f64 {
    let f = |x: f64| residual(x, p, grid);
    let (mut lo, mut hi) = (lo0, hi0);
    let (mut flo, mut fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    let mut side = 0i32;
    for _ in 0..300 {
        // Illinois-modified regula falsi, falling back to bisection near stagnation
        let mut x = (lo * fhi - hi * flo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 || (hi - lo) <= 1e-14 * (1.0 + x.abs()) {
            return x;
        }
        if (fx < 0.0) == (flo < 0.0) {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
        if fx.abs() <= 1e-13 && (hi - lo) <= 1e-12 * (1.0 + x.abs()) {
            return x;
        }
    }
    0.5 * (lo + hi)
}

/// Roots of `Φ₀ = Φ(W₀ ρ̄∞(Φ₀) + B)` for constant input `B = B(0)`.
///
/// With `grid` the moments are those of the sampled profile, which makes the
/// returned state an exact fixed point of the direct solver on that grid.
pub fn homogeneous_branch(
    p: &ModelParams,
    grid: Option<&ActivityGrid>,
) -> Result<EquilibriumState> {
    let c = p.phi.eval(p.input.eval(0.0));
    let f = |x: f64| residual(x, p, grid);
    let mut a = 1.0 + c.abs();
    while !(f(c - a) <= 0.0 && f(c + a) >= 0.0) {
        a *= 2.0;
        if a > 1e12 {
            return Err(Error::NoRoot {
                lo: c - a,
                hi: c + a,
            });
        }
    }
    let (lo, hi) = (c - a, c + a);
    let n = 4000;
    let mut roots: Vec<f64> = Vec::new();
    let mut xa = lo;
    let mut fa = f(xa);
    for i in 1..=n {
        let xb = lo + (hi - lo) * i as f64 / n as f64;
        let fb = f(xb);
        if fa == 0.0 || (fa < 0.0) != (fb < 0.0) {
            let mut r = refine(xa, xb, p, grid);
            // one fixed-point polish: keeps exact roots such as Φ₀ = 0 of a sharp rectifier
            let st = stats_for(r, p, grid);
            let y = p
                .phi
                .eval(p.kernel.integral() * st.mean + p.input.eval(0.0));
            if f(y).abs() <= f(r).abs() {
                r = y;
            }
            if roots.iter().all(|q| (q - r).abs() > 1e-9 * (1.0 + r.abs())) {
                roots.push(r);
            }
        }
        xa = xb;
        fa = fb;
    }
    if roots.is_empty() {
        return Err(Error::NoRoot { lo, hi });
    }
    let first = roots[0];
    let mut st = EquilibriumState::from_stats(stats_for(first, p, grid), p, grid);
    st.other_roots = roots[1..].to_vec();
    Ok(st)
}

/// `σ* = L^{2d} π B² / (2 W₀²)` when `Φ` is nondecreasing with `Φ = 0` on `(-∞, 0]`,
/// `B > 0` is constant and `W₀ < 0`; above it the stationary drift vanishes.
pub fn high_noise_threshold(p: &ModelParams) -> Option<f64> {
    let b = match p.input.form {
        InputForm::Constant { value } => value,
        _ => return None,
    };
    let w0 = p.kernel.integral();
    let vanishes_below_zero = match &p.phi.kind {
        ModulationKind::SmoothedRectifier {
            gain, threshold, ..
        } => *gain >= 0.0 && *threshold >= 0.0,
        ModulationKind::Linear { gain, offset } => *gain == 0.0 && *offset == 0.0,
        ModulationKind::Tabulated { x, y } => {
            p.phi.is_nondecreasing()
                && y[0] == 0.0
                && x.iter().zip(y).all(|(x, y)| *x > 0.0 || *y == 0.0)
        }
        ModulationKind::Sigmoid { .. } => false,
    };
    if !(vanishes_below_zero && b > 0.0 && w0 < 0.0) {
        return None;
    }
    Some(p.measure().powi(2) * PI * b * b / (2.0 * w0 * w0))
}

/// How far a sampled equilibrium is from stationarity.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StationarityResidual {
    /// sup over faces of `|σ ∂_s ρ∞ + (s - Φ₀) ρ∞|` by centred differences
    pub flux: f64,
    /// sup of the direct solver's right-hand side at `ρ∞`
    pub operator: f64,
    /// `|Φ₀ - Φ(W * ρ̄∞ + B)|` on the grid
    pub self_consistency: f64,
}

pub fn stationarity_residual(
    state: &EquilibriumState,
    p: &ModelParams,
    activity: &ActivityGrid,
) -> StationarityResidual {
    let rho = state.profile(p.grid(), activity);
    let ds = activity.ds();
    let mut flux: f64 = 0.0;
    for r in rho.rows() {
        for j in 0..activity.n_s - 1 {
            let s = activity.face(j);
            let v = p.sigma * (r[j + 1] - r[j]) / ds + (s - state.phi0) * 0.5 * (r[j] + r[j + 1]);
            flux = flux.max(v.abs());
        }
    }
    let solver = DirectSolver::for_params(p, SolverConfig::new(1.0, 1.0)).expect("valid config");
    let rhs = solver.rhs(&[rho.clone()]);
    let operator = rhs[0].values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let drift = solver.drift(&[rho]);
    let self_consistency = drift[0]
        .iter()
        .fold(0.0, |m: f64, v| m.max((v - state.phi0).abs()));
    StationarityResidual {
        flux,
        operator,
        self_consistency,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use crate::numerics::quad::adaptive_with_breaks;
    use proptest::prelude::*;

    #[test]
    fn variance_factor_at_zero() {
        assert!((variance_factor(0.0) - (1.0 - 2.0 / PI)).abs() < 1e-15);
    }

    #[test]
    fn stats_match_quadrature() {
        for &(phi0, sigma, l) in &[
            (0.0, 1.0, 1.0),
            (1.3, 0.4, 2.0),
            (-0.8, 2.0, 1.0),
            (5.0, 0.5, 1.0),
        ] {
            let top = 40.0f64.max(phi0 + 40.0 * sigma);
            let br = [0.0, phi0.max(0.0), top];
            let w = |s: f64| (-(s - phi0).powi(2) / (2.0 * sigma)).exp();
            let z = adaptive_with_breaks(w, &br, 1e-16, 1e-14);
            let m1 = adaptive_with_breaks(|s| s * w(s), &br, 1e-16, 1e-14) / z;
            let var = adaptive_with_breaks(|s| (s - m1).powi(2) * w(s), &br, 1e-16, 1e-14) / z;
            let st = truncated_gaussian_stats(phi0, sigma, l);
            assert!((st.z_rho - l * z).abs() < 1e-12 * l * z);
            assert!((st.mean - m1 / l).abs() < 1e-12 * (1.0 + m1));
            assert!((st.m_inf - var / l).abs() < 1e-12 * (1.0 + var));
        }
    }

    #[test]
    fn discrete_stats_converge() {
        let g = ActivityGrid::new(12.0, 600).unwrap();
        let d = discrete_gaussian_stats(0.7, 0.9, 1.0, &g);
        let c = truncated_gaussian_stats(0.7, 0.9, 1.0);
        assert!((d.mean - c.mean).abs() < 1e-4);
        assert!((d.m_inf - c.m_inf).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn variance_factor_bounds(eta in -30.0f64..30.0) {
            let g = variance_factor(eta);
            prop_assert!(g > 1.0 - 2.0 / PI - 1e-12 || eta < 0.0);
            prop_assert!(g < 1.0 + 1e-12);
            prop_assert!(g > 0.0);
        }

        #[test]
        fn mean_slope_equals_variance_over_sigma(phi0 in -3.0f64..4.0, sigma in 0.2f64..3.0) {
            let h = 1e-5;
            let a = truncated_gaussian_stats(phi0 + h, sigma, 1.0).mean;
            let b = truncated_gaussian_stats(phi0 - h, sigma, 1.0).mean;
            let m = truncated_gaussian_stats(phi0, sigma, 1.0).m_inf;
            prop_assert!(((a - b) / (2.0 * h) - m / sigma).abs() < 1e-6);
        }
    }

    fn rectifier_params(sigma: f64) -> ModelParams {
        let g = SpatialGrid::new(1, 1.0, 8).unwrap();
        let k = ConnectivityKernel::new(KernelForm::Constant { value: -1.0 }, &g).unwrap();
        ModelParams::new(
            1.0,
            sigma,
            ModulationFn::rectifier(1.0, 0.0, 0.0),
            k,
            ExternalInput::constant(1.0),
        )
        .unwrap()
    }

    #[test]
    fn high_noise_gives_exact_zero() {
        let p0 = rectifier_params(1.0);
        let thr = high_noise_threshold(&p0).unwrap();
        assert!((thr - PI / 2.0).abs() < 1e-14);
        let p = rectifier_params(2.0 * thr);
        let eq = homogeneous_branch(&p, None).unwrap();
        assert_eq!(eq.phi0, 0.0);
        assert!((eq.mean - (2.0 * p.sigma / PI).sqrt()).abs() < 1e-14);
        let a = ActivityGrid::new(10.0 * p.sigma.sqrt(), 128).unwrap();
        let eqd = homogeneous_branch(&p, Some(&a)).unwrap();
        assert_eq!(eqd.phi0, 0.0);
        let low = homogeneous_branch(&rectifier_params(0.5 * thr), None).unwrap();
        assert!(low.phi0 > 0.0);
    }

    #[test]
    fn linear_modulation_root() {
        let g = SpatialGrid::new(1, 1.0, 8).unwrap();
        let k = ConnectivityKernel::new(KernelForm::Constant { value: -0.5 }, &g).unwrap();
        let p = ModelParams::new(
            1.0,
            0.8,
            ModulationFn::linear(1.0, 0.0),
            k,
            ExternalInput::constant(2.0),
        )
        .unwrap();
        let eq = homogeneous_branch(&p, None).unwrap();
        let st = truncated_gaussian_stats(eq.phi0, 0.8, 1.0);
        assert!((eq.phi0 - (2.0 - 0.5 * st.mean)).abs() < 1e-12);
        assert_eq!(eq.phi0_prime, 1.0);
    }

    #[test]
    fn sampled_profile_is_stationary() {
        let p = rectifier_params(0.6);
        let a = ActivityGrid::new(12.0, 400).unwrap();
        let eq = homogeneous_branch(&p, Some(&a)).unwrap();
        let r = stationarity_residual(&eq, &p, &a);
        assert!(r.operator < 1e-11, "{r:?}");
        assert!(r.self_consistency < 1e-11, "{r:?}");
        assert!(r.flux < 1e-3, "{r:?}");
    }
}
