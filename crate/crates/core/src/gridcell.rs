//! Four orientation-selective populations coupled through shifted copies of one kernel.

use crate::direct::{DirectRun, DirectSolver, SolverConfig};
use crate::equilibrium::EquilibriumState;
use crate::error::{Error, Result};
use crate::model::{Coupling, DensityField, ExternalInput, ModelParams, SpatialGrid};
use crate::numerics::fourier::fourier_modes;
use crate::stefan::{StefanConfig, StefanRun, StefanSolver};
use serde::Serialize;

pub const ORIENTATIONS: [&str; 4] = ["N", "W", "S", "E"];

/// Densities `ρ^β` with their shifts `r^β` (in grid cells) and inputs `B^β`.
#[derive(Clone, Debug)]
pub struct PopulationSet {
    pub fields: Vec<DensityField>,
    pub shifts: Vec<Vec<i64>>,
    pub inputs: Vec<ExternalInput>,
}

impl PopulationSet {
    pub fn new(
        fields: Vec<DensityField>,
        shifts: Vec<Vec<i64>>,
        inputs: Vec<ExternalInput>,
    ) -> Result<Self> {
        if fields.is_empty() || fields.len() != shifts.len() || fields.len() != inputs.len() {
            return Err(Error::InvalidConfig(
                "populations, shifts and inputs must have equal, nonzero length".into(),
            ));
        }
        let d = fields[0].spatial.d;
        for f in &fields[1..] {
            fields[0].check_same_grid(f)?;
        }
        if shifts.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidConfig(format!(
                "shifts must have {d} components"
            )));
        }
        Ok(PopulationSet {
            fields,
            shifts,
            inputs,
        })
    }

    /// Shifts of `k` cells towards north, west, south and east (`d = 2`).
    pub fn cardinal_shifts(k: i64) -> Vec<Vec<i64>> {
        vec![vec![0, k], vec![-k, 0], vec![0, -k], vec![k, 0]]
    }

    pub fn coupling(&self, p: &ModelParams) -> Coupling {
        Coupling::new(
            p.phi.clone(),
            &p.kernel,
            self.shifts.clone(),
            self.inputs.clone(),
        )
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        self.fields.iter().map(|f| f.mean_activity()).collect()
    }

    pub fn max_mass_error(&self) -> f64 {
        self.fields
            .iter()
            .map(|f| f.mass_error())
            .fold(0.0, f64::max)
    }
}

/// Snap a physical shift to the nearest multiple of the grid spacing.
pub fn snap_shift(r: &[f64], grid: &SpatialGrid) -> Vec<i64> {
    r.iter().map(|v| (v / grid.dx()).round() as i64).collect()
}

/// `Φ^β = Φ(¼ Σ_β' W^β' * ρ̄^β' + B^β(t))`.
pub fn coupled_drift(set: &PopulationSet, p: &ModelParams, t: f64) -> Vec<Vec<f64>> {
    set.coupling(p).drift(t, &set.means())
}

pub fn direct_solver4(
    set: &PopulationSet,
    p: &ModelParams,
    cfg: SolverConfig,
) -> Result<DirectSolver> {
    DirectSolver::new(set.coupling(p), p.tau_c, p.sigma, cfg)
}

/// One implicit step of all populations.
pub fn step4(set: &mut PopulationSet, p: &ModelParams, cfg: &SolverConfig) -> Result<()> {
    let solver = direct_solver4(set, p, cfg.clone())?;
    solver.step(&mut set.fields)
}

pub fn run4(set: &PopulationSet, p: &ModelParams, cfg: SolverConfig) -> Result<DirectRun> {
    direct_solver4(set, p, cfg)?.run(set.fields.clone())
}

pub fn stefan4(set: &PopulationSet, p: &ModelParams, cfg: StefanConfig) -> Result<StefanRun> {
    StefanSolver::new(set.coupling(p), p.tau_c, p.sigma, cfg)?.run(set.fields.clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct ShiftCondition {
    /// `max_{β,j} |r^β + r^j|`, torus distance
    pub lhs: f64,
    /// `α^{3/2} (2 - 4ξ) γ^{1/2} σ / (‖∇W‖ ‖Φ'‖ M∞)`
    pub rhs: f64,
    pub holds: bool,
    /// `2 L^d`, for the variant without kernel symmetry
    pub asymmetric_lhs: f64,
    /// `α^{3/2} (2 - ξ) γ^{1/2} σ / (‖∇W‖ ‖Φ'‖ M∞^{1/2})`
    pub asymmetric_rhs: f64,
    pub asymmetric_holds: bool,
    pub grad_w: f64,
    pub lipschitz: f64,
    pub m_inf: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub xi: f64,
}

fn torus_norm(cells: &[i64], grid: &SpatialGrid) -> f64 {
    let n = grid.n as i64;
    cells
        .iter()
        .map(|&c| {
            let w = c.rem_euclid(n);
            let w = if w > n / 2 { w - n } else { w };
            (w as f64 * grid.dx()).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

pub fn shift_condition(
    eq: &EquilibriumState,
    p: &ModelParams,
    shifts: &[Vec<i64>],
    gamma: f64,
    alpha: f64,
    xi: f64,
) -> ShiftCondition {
    let g = p.grid();
    let mut lhs: f64 = 0.0;
    for a in shifts {
        for b in shifts {
            let s: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            lhs = lhs.max(torus_norm(&s, g));
        }
    }
    let grad_w = p.kernel.grad_sup();
    let lipschitz = p.phi.lipschitz();
    let scale = alpha.powf(1.5) * gamma.sqrt() * p.sigma;
    let denom = grad_w * lipschitz;
    let bound = |num: f64, m: f64| {
        if denom * m == 0.0 {
            f64::INFINITY
        } else {
            num / (denom * m)
        }
    };
    let rhs = bound(scale * (2.0 - 4.0 * xi), eq.m_inf);
    let asymmetric_rhs = bound(scale * (2.0 - xi), eq.m_inf.sqrt());
    let asymmetric_lhs = 2.0 * g.measure();
    ShiftCondition {
        lhs,
        rhs,
        holds: lhs <= rhs,
        asymmetric_lhs,
        asymmetric_rhs,
        asymmetric_holds: asymmetric_lhs <= asymmetric_rhs,
        grad_w,
        lipschitz,
        m_inf: eq.m_inf,
        gamma,
        alpha,
        xi,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NonlinearCheck4 {
    pub alpha: f64,
    pub holds: bool,
    pub smallest: f64,
    pub offending: Vec<Vec<i64>>,
}

/// Mode-wise positivity of the quadratic form `Σ_β (1-α)|ĝ_β|² - (M∞Φ₀'/4σ) Ŵ_k Re[conj(Σĝ_β) Σ e^{-ik·r^β} ĝ_β]`,
/// whose extreme eigenvalues are `(1-α) - (M∞Φ₀'/4σ) Ŵ_k λ±` with `λ± = (Re Σ_β e^{-ik·r^β} ± P)/2`.
pub fn check_nonlinear_condition4(
    p: &ModelParams,
    eq: &EquilibriumState,
    shifts: &[Vec<i64>],
    alpha: f64,
    k_max: usize,
) -> Result<NonlinearCheck4> {
    if !p.kernel.is_symmetric() {
        return Err(Error::AsymmetricKernel(p.kernel.asymmetry()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let g = p.grid();
    let np = shifts.len() as f64;
    let c = eq.m_inf * eq.phi0_prime / (np * p.sigma);
    let mut smallest = f64::INFINITY;
    let mut offending = Vec::new();
    for m in fourier_modes(&p.kernel.samples, g.n, g.d, g.cell_volume(), k_max) {
        let phase: f64 = shifts
            .iter()
            .map(|r| {
                let kr: f64 = m.k.iter().zip(r).map(|(k, r)| (*k * *r) as f64).sum();
                (2.0 * std::f64::consts::PI * kr / g.n as f64).cos()
            })
            .sum();
        let worst = [0.5 * (phase + np), 0.5 * (phase - np)]
            .iter()
            .map(|l| (1.0 - alpha) - c * m.value.re * l)
            .fold(f64::INFINITY, f64::min);
        smallest = smallest.min(worst);
        if worst <= 0.0 {
            offending.push(m.k);
        }
    }
    Ok(NonlinearCheck4 {
        alpha,
        holds: offending.is_empty(),
        smallest,
        offending,
    })
}
