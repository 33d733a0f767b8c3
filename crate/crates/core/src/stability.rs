//! Relative entropy, Poincaré constants, stability conditions and decay diagnostics.

use crate::direct::{bernoulli, DirectRun, DirectSolver};
use crate::equilibrium::EquilibriumState;
use crate::error::{Error, Result};
use crate::model::{ActivityGrid, Coupling, DensityField, ModelParams};
use crate::numerics::conv::PeriodicConvolver;
use crate::numerics::fourier::fourier_modes;
use crate::numerics::linalg::tridiagonal_eigenvalue;
use crate::numerics::quad::gauss_legendre;
use serde::{Deserialize, Serialize};

/// Cells where `ρ∞` falls below this are left out of the entropy.
pub const ENTROPY_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EntropyValue {
    /// `∫∫ (ρ - ρ∞)² / ρ∞ ds dx`
    pub value: f64,
    pub excluded_mass: f64,
}

pub fn relative_entropy(rho: &DensityField, rho_inf: &DensityField) -> Result<EntropyValue> {
    rho.check_same_grid(rho_inf)?;
    let w = rho.activity.ds() * rho.spatial.cell_volume();
    let mut value = 0.0;
    let mut excluded = 0.0;
    for (a, b) in rho.values.iter().zip(&rho_inf.values) {
        if *b < ENTROPY_FLOOR {
            excluded += a.abs();
        } else {
            value += (a - b) * (a - b) / b;
        }
    }
    Ok(EntropyValue {
        value: value * w,
        excluded_mass: excluded * w,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoincareMethod {
    /// `1/σ`, valid for every truncated Gaussian
    Conservative,
    /// spectral gap of the discretised weighted operator
    Numeric,
}

/// Poincaré constant of `ρ∞` on the half-line.
pub fn poincare_constant(
    eq: &EquilibriumState,
    activity: &ActivityGrid,
    method: PoincareMethod,
) -> f64 {
    match method {
        PoincareMethod::Conservative => 1.0 / eq.sigma,
        PoincareMethod::Numeric => {
            let n = activity.n_s;
            let ds = activity.ds();
            let w: Vec<f64> = (0..n - 1)
                .map(|j| (eq.phi0 - activity.face(j)) * ds / eq.sigma)
                .collect();
            let mut diag = vec![0.0; n];
            let mut off = vec![0.0; n - 1];
            for j in 0..n - 1 {
                diag[j] += bernoulli(-w[j]);
                diag[j + 1] += bernoulli(w[j]);
                off[j] = -bernoulli(-w[j]) * (-0.5 * w[j]).exp();
            }
            let h2 = ds * ds;
            diag.iter_mut().for_each(|v| *v /= h2);
            off.iter_mut().for_each(|v| *v /= h2);
            tridiagonal_eigenvalue(&diag, &off, 1)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl ConditionRecord {
    fn strict(name: &str, lhs: f64, rhs: f64) -> Self {
        ConditionRecord {
            name: name.into(),
            lhs,
            rhs,
            holds: lhs < rhs,
        }
    }
}

/// `C = ‖Φ'‖_∞ ‖W‖_{L²} L^{-d/2} sup M∞^{1/2}`.
pub fn coupling_constant(p: &ModelParams, eq: &EquilibriumState) -> f64 {
    let d = p.grid().d as f64;
    p.phi.lipschitz() * p.kernel.l2_norm() * p.grid().length.powf(-d / 2.0) * eq.m_inf.sqrt()
}

/// The three sufficient conditions for exponential stability, strongest first.
pub fn check_prop_stab1(
    p: &ModelParams,
    eq: &EquilibriumState,
    gamma: f64,
) -> Vec<ConditionRecord> {
    let c = coupling_constant(p, eq);
    let s = p.sigma;
    let lw = p.phi.lipschitz() * p.kernel.l2_norm();
    let mut out = vec![
        ConditionRecord::strict("poincare-estimate", c, 0.5 * s * gamma.sqrt()),
        ConditionRecord::strict("noise-dominated", c, 0.5 * s.sqrt()),
        ConditionRecord::strict("weak-coupling", lw / p.measure(), 0.5),
    ];
    if eq.phi0 == 0.0 {
        let rhs = p.measure() / (2.0 * (1.0 - 2.0 / std::f64::consts::PI).sqrt());
        out.push(ConditionRecord {
            name: "high-noise-half-gaussian".into(),
            lhs: lw,
            rhs,
            holds: lw <= rhs,
        });
    }
    out
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayPrediction {
    /// guaranteed rate `K` in `RE(t) <= e^{-2Kt} RE(0)`
    pub k: f64,
    /// `K_ε`, valid once the entropy is small enough
    pub k_eps: f64,
    pub epsilon: f64,
}

pub fn decay_rate_prediction(
    p: &ModelParams,
    eq: &EquilibriumState,
    gamma: f64,
    re0: f64,
    epsilon: f64,
) -> Result<DecayPrediction> {
    let c = coupling_constant(p, eq);
    let s = p.sigma;
    let base = gamma.sqrt() * (0.5 * s * gamma.sqrt() - c);
    if base <= 0.0 {
        return Err(Error::ConditionFailed(format!(
            "C = {c:.4e} is not below σγ^(1/2)/2 = {:.4e}",
            0.5 * s * gamma.sqrt()
        )));
    }
    let k = base - c * c / (2.0 * p.measure() * s) * re0;
    Ok(DecayPrediction {
        k: k / p.tau_c,
        k_eps: (base - epsilon) / p.tau_c,
        epsilon,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FourierMargin {
    pub k: Vec<i64>,
    pub w_hat: f64,
    /// `σ/M∞ - Φ₀' Re Ŵ_k`
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FourierThreshold {
    pub margins: Vec<FourierMargin>,
    pub stable: bool,
}

/// Linear stability of the homogeneous state mode by mode: `Φ₀' Ŵ_k < σ/M∞`.
pub fn linear_fourier_threshold(
    p: &ModelParams,
    eq: &EquilibriumState,
    k_max: usize,
) -> FourierThreshold {
    let g = p.grid();
    let modes = fourier_modes(&p.kernel.samples, g.n, g.d, g.cell_volume(), k_max);
    let margins: Vec<FourierMargin> = modes
        .into_iter()
        .map(|m| FourierMargin {
            w_hat: m.value.re,
            margin: p.sigma / eq.m_inf - eq.phi0_prime * m.value.re,
            k: m.k,
        })
        .collect();
    let stable = margins.iter().all(|m| m.margin > 0.0);
    FourierThreshold { margins, stable }
}

#[derive(Clone, Debug, Serialize)]
pub struct NonlinearCheck {
    pub alpha: f64,
    pub holds: bool,
    pub smallest: f64,
    pub offending: Vec<Vec<i64>>,
}

/// Positivity of the symbol `(1 - α) - (M∞/σ) Φ₀' Ŵ_k` for every `|k_i| <= k_max`.
pub fn check_nonlinear_condition(
    p: &ModelParams,
    eq: &EquilibriumState,
    alpha: f64,
    k_max: usize,
) -> Result<NonlinearCheck> {
    if !p.kernel.is_symmetric() {
        return Err(Error::AsymmetricKernel(p.kernel.asymmetry()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let g = p.grid();
    let modes = fourier_modes(&p.kernel.samples, g.n, g.d, g.cell_volume(), k_max);
    let mut smallest = f64::INFINITY;
    let mut offending = Vec::new();
    for m in modes {
        let c = (1.0 - alpha) - eq.m_inf / p.sigma * eq.phi0_prime * m.value.re;
        smallest = smallest.min(c);
        if c <= 0.0 {
            offending.push(m.k);
        }
    }
    Ok(NonlinearCheck {
        alpha,
        holds: offending.is_empty(),
        smallest,
        offending,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// largest `(E_{n+1} - E_n) / (1 + |E_n|)`
    pub max_increase: f64,
}

/// Noiseless mean dynamics `τ_c ρ̄' = -ρ̄ + Φ(W * ρ̄ + B)/L^d` (RK4) and the functional
/// `E[ζ] = -(1/2L^d) ∫∫ W(x-y) ζ(y) ζ(x) + ∫ ∫_{Φ(B)}^{ζ(x)} (Φ^{-1}(ω) - B) dω dx` at `ζ = Φ_ρ̄`.
pub fn lyapunov_noiseless(
    p: &ModelParams,
    mean0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<LyapunovTrace> {
    if !p.phi.is_nondecreasing() {
        return Err(Error::NotInvertible(
            "modulation must be nondecreasing".into(),
        ));
    }
    let g = p.grid();
    let conv = PeriodicConvolver::new(&p.kernel.samples, g.n, g.d, g.cell_volume());
    let ld = p.measure();
    let b = p.input.eval(0.0);
    let rhs = |m: &[f64]| -> Vec<f64> {
        let f = conv.apply(m);
        m.iter()
            .zip(&f)
            .map(|(m, f)| (-m + p.phi.eval(f + b) / ld) / p.tau_c)
            .collect()
    };
    let (gx, gw) = gauss_legendre(24);
    let functional = |m: &[f64]| -> Result<f64> {
        let zeta: Vec<f64> = conv.apply(m).iter().map(|f| p.phi.eval(f + b)).collect();
        let wz = conv.apply(&zeta);
        let mut quad = 0.0;
        let mut inner = 0.0;
        for (z, wz) in zeta.iter().zip(&wz) {
            quad += z * wz;
            let top = p.phi.inverse(*z)?;
            let half = 0.5 * (top - b);
            let mid = 0.5 * (top + b);
            inner += gx
                .iter()
                .zip(&gw)
                .map(|(x, w)| {
                    let q = mid + half * x;
                    w * (q - b) * p.phi.deriv(q)
                })
                .sum::<f64>()
                * half;
        }
        Ok((-quad / (2.0 * ld) + inner) * g.cell_volume())
    };
    let steps = (t_end / dt).round() as usize;
    let mut m = mean0.to_vec();
    let mut times = vec![0.0];
    let mut values = vec![functional(&m)?];
    let mut max_increase = f64::NEG_INFINITY;
    for k in 1..=steps {
        let k1 = rhs(&m);
        let tmp: Vec<f64> = m.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k2 = rhs(&tmp);
        let tmp: Vec<f64> = m.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k3 = rhs(&tmp);
        let tmp: Vec<f64> = m.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
        let k4 = rhs(&tmp);
        for i in 0..m.len() {
            m[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let e = functional(&m)?;
        let prev = *values.last().unwrap();
        max_increase = max_increase.max((e - prev) / (1.0 + prev.abs()));
        times.push(k as f64 * dt);
        values.push(e);
    }
    Ok(LyapunovTrace {
        times,
        values,
        max_increase,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayFit {
    /// `-d/dt log value`
    pub rate: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Values at or below this are treated as having hit round-off.
pub const DECAY_FLOOR: f64 = 1e-16;

/// Least-squares slope of `log value` over the last half of the samples above the floor.
pub fn measure_decay(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    let usable = values
        .iter()
        .position(|v| *v <= DECAY_FLOOR)
        .unwrap_or(values.len());
    let start = usable / 2;
    if usable - start < 3 {
        return Err(Error::InsufficientData(format!(
            "{} samples above the floor",
            usable
        )));
    }
    let ts = &times[start..usable];
    let ys: Vec<f64> = values[start..usable].iter().map(|v| v.ln()).collect();
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(DecayFit {
        rate: -slope,
        r_squared,
        samples: ts.len(),
    })
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EntropyTrace {
    pub times: Vec<f64>,
    /// summed over populations
    pub relative_entropy: Vec<f64>,
    /// `Q = ∫ (2E - Φ^δ ρ̄^δ / σ) dx`, summed over populations
    pub q: Vec<f64>,
    pub excluded_mass: f64,
}

pub fn entropy_trace(
    solver: &DirectSolver,
    run: &DirectRun,
    eq: &EquilibriumState,
) -> Result<EntropyTrace> {
    let first = &run.snapshots[0][0];
    let rho_inf = eq.profile(&first.spatial, &first.activity);
    let mean_inf = rho_inf.mean_activity();
    let mut tr = EntropyTrace::default();
    for (t, state) in run.times.iter().zip(&run.snapshots) {
        let drift = solver.drift(state);
        let mut re = 0.0;
        let mut h = 0.0;
        for (rho, dr) in state.iter().zip(&drift) {
            let e = relative_entropy(rho, &rho_inf)?;
            re += e.value;
            tr.excluded_mass = tr.excluded_mass.max(e.excluded_mass);
            let m = rho.mean_activity();
            h += m
                .iter()
                .zip(&mean_inf)
                .zip(dr)
                .map(|((m, mi), f)| (f - eq.phi0) * (m - mi))
                .sum::<f64>()
                * rho.spatial.cell_volume();
        }
        tr.times.push(*t);
        tr.relative_entropy.push(re);
        tr.q.push(re - h / eq.sigma);
    }
    Ok(tr)
}

/// Bounds `α RE <= Q <= (1 + κ) RE` with `κ = ‖Φ'‖ ‖W‖_{L²} M∞ L^{d/2} / σ`;
/// the lower one requires `κ <= 1 - α`.
pub fn q_sandwich(p: &ModelParams, eq: &EquilibriumState, alpha: f64, re: f64) -> (f64, f64) {
    let d = p.grid().d as f64;
    let kappa =
        p.phi.lipschitz() * p.kernel.l2_norm() * eq.m_inf * p.grid().length.powf(d / 2.0) / p.sigma;
    (alpha * re, (1.0 + kappa) * re)
}

/// Sum of per-population relative entropies against a common `ρ∞`.
pub fn summed_entropy(state: &[DensityField], rho_inf: &DensityField) -> Result<f64> {
    let mut re = 0.0;
    for r in state {
        re += relative_entropy(r, rho_inf)?.value;
    }
    Ok(re)
}

/// Mean-field coupling of a single population, used by the noiseless check.
pub fn single_coupling(p: &ModelParams) -> Coupling {
    Coupling::single(p)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportParameters {
    pub alpha: f64,
    pub poincare_method: PoincareMethod,
    /// `γ(ρ∞)`
    pub gamma: f64,
    pub m_inf: f64,
    pub phi_lipschitz: f64,
    pub w_l2: f64,
    pub measure: f64,
    pub sigma: f64,
    pub tau_c: f64,
    pub phi0: f64,
    pub phi0_prime: f64,
    /// `C` entering the Poincaré estimate
    pub coupling_constant: f64,
    pub re0: f64,
}

/// Every sufficient condition with its operands, plus the predicted rate where one exists.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub parameters: ReportParameters,
    pub conditions: Vec<ConditionRecord>,
    pub decay: Option<DecayPrediction>,
    pub fourier: FourierThreshold,
    pub nonlinear: Option<NonlinearCheck>,
}

#[allow(clippy::too_many_arguments)]
pub fn stability_report(
    p: &ModelParams,
    eq: &EquilibriumState,
    activity: &ActivityGrid,
    method: PoincareMethod,
    alpha: f64,
    re0: f64,
    epsilon: f64,
    k_max: usize,
) -> StabilityReport {
    let gamma = poincare_constant(eq, activity, method);
    let mut conditions = check_prop_stab1(p, eq, gamma);
    let fourier = linear_fourier_threshold(p, eq, k_max);
    // the least stable mode, recorded as `Φ₀' Ŵ_k < σ/M∞`
    if let Some(m) = fourier
        .margins
        .iter()
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
    {
        conditions.push(ConditionRecord::strict(
            "linear-fourier",
            eq.phi0_prime * m.w_hat,
            p.sigma / eq.m_inf,
        ));
    }
    let nonlinear = check_nonlinear_condition(p, eq, alpha, k_max).ok();
    if let Some(n) = &nonlinear {
        conditions.push(ConditionRecord::strict(
            "nonlinear-quadratic-form",
            0.0,
            n.smallest,
        ));
    }
    StabilityReport {
        parameters: ReportParameters {
            alpha,
            poincare_method: method,
            gamma,
            m_inf: eq.m_inf,
            phi_lipschitz: p.phi.lipschitz(),
            w_l2: p.kernel.l2_norm(),
            measure: p.measure(),
            sigma: p.sigma,
            tau_c: p.tau_c,
            phi0: eq.phi0,
            phi0_prime: eq.phi0_prime,
            coupling_constant: coupling_constant(p, eq),
            re0,
        },
        conditions,
        decay: decay_rate_prediction(p, eq, gamma, re0, epsilon).ok(),
        fourier,
        nonlinear,
    }
}
