//! Implicit finite-volume solver for the nonlocal Fokker-Planck equation
//! `τ_c ∂_t ρ = -∂_s[(Φ_ρ̄ - s) ρ] + σ ∂_s² ρ` with a no-flux wall at `s = 0` and `s = s_max`.

use crate::error::{Error, Result};
use crate::model::{Coupling, DensityField, ModelParams};
use crate::numerics::linalg::solve_tridiagonal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ChangCooper,
    UpwindImplicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CouplingMode {
    /// drift evaluated once per step from the old state
    Frozen,
    /// drift re-evaluated from the new state until the update stalls
    Iterated { max_iter: usize, tol: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_coupling")]
    pub coupling: CouplingMode,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_scheme() -> Scheme {
    Scheme::ChangCooper
}
fn default_coupling() -> CouplingMode {
    CouplingMode::Frozen
}
fn default_stride() -> usize {
    100
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SolverConfig {
            dt,
            t_end,
            scheme: Scheme::ChangCooper,
            coupling: CouplingMode::Frozen,
            snapshot_stride: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "t_end must be nonnegative, got {}",
                self.t_end
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidConfig(
                "snapshot_stride must be at least 1".into(),
            ));
        }
        if let CouplingMode::Iterated { max_iter, tol } = self.coupling {
            if max_iter == 0 || !(tol > 0.0) {
                return Err(Error::InvalidConfig(
                    "iterated coupling needs max_iter >= 1 and tol > 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Bernoulli function `w / (e^w - 1)`.
#[inline]
pub fn bernoulli(w: f64) -> f64 {
    if w.abs() < 1e-6 {
        1.0 - 0.5 * w + w * w / 12.0
    } else if w > 700.0 {
        w * (-w).exp()
    } else {
        w / w.exp_m1()
    }
}

/// Face coefficients so that the flux through face `j + 1/2` is `p[j] ρ_j - q[j] ρ_{j+1}`.
pub fn face_coefficients(
    drift: f64,
    ds: f64,
    sigma: f64,
    scheme: Scheme,
    p: &mut [f64],
    q: &mut [f64],
) {
    let c = sigma / ds;
    for j in 0..p.len() {
        let a = drift - (j + 1) as f64 * ds;
        match scheme {
            Scheme::ChangCooper => {
                let w = a * ds / sigma;
                p[j] = c * bernoulli(-w);
                q[j] = c * bernoulli(w);
            }
            Scheme::UpwindImplicit => {
                p[j] = a.max(0.0) + c;
                q[j] = (-a).max(0.0) + c;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct DirectSolver {
    pub coupling: Coupling,
    pub tau_c: f64,
    pub sigma: f64,
    pub cfg: SolverConfig,
}

/// Trajectory recorded by [`DirectSolver::run`].
#[derive(Clone, Debug, Default)]
pub struct DirectRun {
    pub times: Vec<f64>,
    /// `snapshots[k][β]`
    pub snapshots: Vec<Vec<DensityField>>,
    /// worst per-x relative mass error over every step
    pub max_mass_error: f64,
    /// smallest density value over every step
    pub min_value: f64,
    pub steps: usize,
}

impl DirectRun {
    pub fn final_state(&self) -> &[DensityField] {
        self.snapshots.last().unwrap()
    }
}

impl DirectSolver {
    pub fn new(coupling: Coupling, tau_c: f64, sigma: f64, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(DirectSolver {
            coupling,
            tau_c,
            sigma,
            cfg,
        })
    }

    pub fn for_params(p: &ModelParams, cfg: SolverConfig) -> Result<Self> {
        Self::new(Coupling::single(p), p.tau_c, p.sigma, cfg)
    }

    pub fn drift(&self, state: &[DensityField]) -> Vec<Vec<f64>> {
        let means: Vec<Vec<f64>> = state.iter().map(|r| r.mean_activity()).collect();
        self.coupling.drift(state[0].t, &means)
    }

    /// Semi-discrete right-hand side `∂_t ρ` at the current state.
    pub fn rhs(&self, state: &[DensityField]) -> Vec<DensityField> {
        let drift = self.drift(state);
        state
            .iter()
            .zip(&drift)
            .map(|(rho, dr)| {
                let n = rho.n_s();
                let ds = rho.activity.ds();
                let mut out = rho.clone();
                let mut p = vec![0.0; n - 1];
                let mut q = vec![0.0; n - 1];
                for x in 0..rho.spatial.cells() {
                    face_coefficients(dr[x], ds, self.sigma, self.cfg.scheme, &mut p, &mut q);
                    let r = rho.row(x);
                    let o = out.row_mut(x);
                    for j in 0..n {
                        let right = if j + 1 < n {
                            p[j] * r[j] - q[j] * r[j + 1]
                        } else {
                            0.0
                        };
                        let left = if j > 0 {
                            p[j - 1] * r[j - 1] - q[j - 1] * r[j]
                        } else {
                            0.0
                        };
                        o[j] = -(right - left) / (ds * self.tau_c);
                    }
                }
                out
            })
            .collect()
    }

    fn implicit_solve(
        &self,
        old: &[DensityField],
        drift: &[Vec<f64>],
        dt: f64,
    ) -> Vec<DensityField> {
        old.iter()
            .zip(drift)
            .map(|(rho, dr)| {
                let n = rho.n_s();
                let ds = rho.activity.ds();
                let k = dt / (self.tau_c * ds);
                let mut out = rho.clone();
                out.t = rho.t + dt;
                out.values.par_chunks_mut(n).enumerate().for_each_init(
                    || {
                        (
                            vec![0.0; n - 1],
                            vec![0.0; n - 1],
                            vec![0.0; n],
                            vec![0.0; n],
                            vec![0.0; n],
                            Vec::new(),
                        )
                    },
                    |(p, q, a, b, c, scratch), (x, row)| {
                        face_coefficients(dr[x], ds, self.sigma, self.cfg.scheme, p, q);
                        for j in 0..n {
                            let right_p = if j + 1 < n { p[j] } else { 0.0 };
                            let left_q = if j > 0 { q[j - 1] } else { 0.0 };
                            b[j] = 1.0 + k * (right_p + left_q);
                            a[j] = if j > 0 { -k * p[j - 1] } else { 0.0 };
                            c[j] = if j + 1 < n { -k * q[j] } else { 0.0 };
                        }
                        solve_tridiagonal(a, b, c, row, scratch);
                    },
                );
                out
            })
            .collect()
    }

    /// Advance all populations by one step of size `cfg.dt`.
    pub fn step(&self, state: &mut Vec<DensityField>) -> Result<()> {
        self.step_by(state, self.cfg.dt)
    }

    pub fn step_by(&self, state: &mut Vec<DensityField>, dt: f64) -> Result<()> {
        let drift = self.drift(state);
        let mut next = self.implicit_solve(state, &drift, dt);
        if let CouplingMode::Iterated { max_iter, tol } = self.cfg.coupling {
            for _ in 0..max_iter {
                let d = self.drift(&next);
                let cand = self.implicit_solve(state, &d, dt);
                let change = cand
                    .iter()
                    .zip(&next)
                    .map(|(a, b)| a.sup_distance(b).unwrap())
                    .fold(0.0, f64::max);
                next = cand;
                if change < tol {
                    break;
                }
            }
        }
        if next.iter().any(|r| r.values.iter().any(|v| !v.is_finite())) {
            return Err(Error::Divergence {
                t: state[0].t,
                reason: "non-finite density".into(),
            });
        }
        *state = next;
        Ok(())
    }

    /// Integrate to `cfg.t_end`, recording every `snapshot_stride`-th step and the final state.
    pub fn run(&self, init: Vec<DensityField>) -> Result<DirectRun> {
        let steps = self.cfg.steps();
        let t0 = init[0].t;
        let mut state = init;
        let mut run = DirectRun {
            min_value: f64::INFINITY,
            ..Default::default()
        };
        let track = |run: &mut DirectRun, s: &[DensityField]| {
            for r in s {
                run.max_mass_error = run.max_mass_error.max(r.mass_error());
                run.min_value = run.min_value.min(r.min_value());
            }
        };
        track(&mut run, &state);
        run.times.push(state[0].t);
        run.snapshots.push(state.clone());
        for k in 1..=steps {
            let target = t0 + (k as f64 * self.cfg.dt).min(self.cfg.t_end);
            let dt = target - state[0].t;
            self.step_by(&mut state, dt)?;
            for r in state.iter_mut() {
                r.t = target;
            }
            track(&mut run, &state);
            if k % self.cfg.snapshot_stride == 0 || k == steps {
                run.times.push(state[0].t);
                run.snapshots.push(state.clone());
            }
        }
        run.steps = steps;
        Ok(run)
    }
}

/// One implicit step of a single population.
pub fn step(rho: &DensityField, p: &ModelParams, cfg: &SolverConfig) -> Result<DensityField> {
    let solver = DirectSolver::for_params(p, cfg.clone())?;
    let mut s = vec![rho.clone()];
    solver.step(&mut s)?;
    Ok(s.pop().unwrap())
}

/// Universal bound `(1/L^d) √(2/(πσ)) / √(1 - e^{-2t/τ_c})` on the boundary trace for `Φ >= 0`.
pub fn boundary_bound(t: f64, sigma: f64, tau_c: f64, measure: f64) -> f64 {
    (2.0 / (std::f64::consts::PI * sigma)).sqrt() / measure / (-(-2.0 * t / tau_c).exp_m1()).sqrt()
}

/// Test functions for the weak formulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestFunction {
    One,
    Identity,
    Square,
    /// `ε log cosh(s / ε)`
    SmoothedLinear(f64),
}

impl TestFunction {
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        match *self {
            TestFunction::One => (1.0, 0.0, 0.0),
            TestFunction::Identity => (s, 1.0, 0.0),
            TestFunction::Square => (s * s, 2.0 * s, 2.0),
            TestFunction::SmoothedLinear(e) => {
                let u = s / e;
                let lc = u.abs() + (-2.0 * u.abs()).exp().ln_1p() - std::f64::consts::LN_2;
                let th = u.tanh();
                (e * lc, th, (1.0 - th * th) / e)
            }
        }
    }
}

/// Sup over interior snapshots and `x` of
/// `|τ_c d/dt ∫hρ - ∫[(Φ - s)h' + σh'']ρ - σ h'(0) ρ(x, 0, t)|`, population `beta`.
pub fn weak_moment_residual(
    solver: &DirectSolver,
    run: &DirectRun,
    h: TestFunction,
    beta: usize,
) -> f64 {
    let k = run.snapshots.len();
    if k < 3 {
        return 0.0;
    }
    let moments: Vec<Vec<f64>> = run
        .snapshots
        .iter()
        .map(|s| s[beta].moment(|v| h.eval(v).0))
        .collect();
    let mut worst: f64 = 0.0;
    for i in 1..k - 1 {
        let state = &run.snapshots[i];
        let drift = solver.drift(state);
        let rho = &state[beta];
        let trace = rho.boundary_trace();
        let ds = rho.activity.ds();
        let dt = run.times[i + 1] - run.times[i - 1];
        for x in 0..rho.spatial.cells() {
            let lhs = solver.tau_c * (moments[i + 1][x] - moments[i - 1][x]) / dt;
            let mut rhs = 0.0;
            for (j, v) in rho.row(x).iter().enumerate() {
                let s = rho.activity.center(j);
                let (_, h1, h2) = h.eval(s);
                rhs += ((drift[beta][x] - s) * h1 + solver.sigma * h2) * v;
            }
            rhs = rhs * ds + solver.sigma * h.eval(0.0).1 * trace[x];
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}
