use super::density::DensityField;
use super::grid::{ActivityGrid, SpatialGrid};
use super::input::ExternalInput;
use super::kernel::ConnectivityKernel;
use super::modulation::ModulationFn;
use crate::error::{Error, Result};

/// Physical parameters of the noisy neural field.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub tau_c: f64,
    pub sigma: f64,
    pub phi: ModulationFn,
    pub kernel: ConnectivityKernel,
    pub input: ExternalInput,
}

impl ModelParams {
    pub fn new(
        tau_c: f64,
        sigma: f64,
        phi: ModulationFn,
        kernel: ConnectivityKernel,
        input: ExternalInput,
    ) -> Result<Self> {
        if !(tau_c > 0.0) || !tau_c.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tau_c must be positive, got {tau_c}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !phi.lipschitz().is_finite() {
            return Err(Error::InvalidConfig("modulation is not Lipschitz".into()));
        }
        Ok(ModelParams {
            tau_c,
            sigma,
            phi,
            kernel,
            input,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.kernel.grid
    }

    pub fn measure(&self) -> f64 {
        self.grid().measure()
    }

    /// Rough bound for `|Φ|` along trajectories whose mean activity stays below `mean_bound`.
    pub fn drift_bound(&self, mean_bound: f64) -> f64 {
        let b = self.input.max_abs();
        let reach = self.kernel.l1_norm() * mean_bound;
        self.phi.max_abs_on(-b - reach, b + reach)
    }

    /// Activity truncation following `s_max >= Φ_max + 10 √σ`.
    pub fn default_s_max(&self, initial_mean: f64) -> f64 {
        let ld = self.measure();
        let phi_b = self
            .phi
            .max_abs_on(-self.input.max_abs(), self.input.max_abs());
        let guess = 2.0 * initial_mean.max((phi_b + 3.0 * self.sigma.sqrt()) / ld);
        ActivityGrid::required_s_max(self.drift_bound(guess), self.sigma)
    }
}

/// Change of units `ρ(x, s, t) = σ^{-1/2} ρ̃(x, s/√σ, t/τ_c)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RescaleMap {
    pub sigma: f64,
    pub tau_c: f64,
}

impl RescaleMap {
    pub fn time_to_normalized(&self, t: f64) -> f64 {
        t / self.tau_c
    }

    pub fn time_to_original(&self, t: f64) -> f64 {
        t * self.tau_c
    }

    pub fn activity_to_normalized(&self, s: f64) -> f64 {
        s / self.sigma.sqrt()
    }

    pub fn to_normalized(&self, rho: &DensityField) -> DensityField {
        let r = self.sigma.sqrt();
        DensityField {
            spatial: rho.spatial.clone(),
            activity: ActivityGrid {
                s_max: rho.activity.s_max / r,
                n_s: rho.activity.n_s,
            },
            values: rho.values.iter().map(|v| v * r).collect(),
            t: rho.t / self.tau_c,
        }
    }

    pub fn to_original(&self, rho: &DensityField) -> DensityField {
        let r = self.sigma.sqrt();
        DensityField {
            spatial: rho.spatial.clone(),
            activity: ActivityGrid {
                s_max: rho.activity.s_max * r,
                n_s: rho.activity.n_s,
            },
            values: rho.values.iter().map(|v| v / r).collect(),
            t: rho.t * self.tau_c,
        }
    }
}

/// Parameters in units where `τ_c = σ = 1`.
///
/// `Φ̃ = Φ/√σ`, `B̃(t̃) = B(τ_c t̃)`, and `W̃ = √σ W` so that `W̃ * ρ̃̄ = W * ρ̄`.
pub fn normalize_parameters(p: &ModelParams) -> (ModelParams, RescaleMap) {
    let r = p.sigma.sqrt();
    let np = ModelParams {
        tau_c: 1.0,
        sigma: 1.0,
        phi: p.phi.scaled(1.0 / r),
        kernel: p.kernel.scaled(r),
        input: p.input.with_time_scale(p.tau_c),
    };
    (
        np,
        RescaleMap {
            sigma: p.sigma,
            tau_c: p.tau_c,
        },
    )
}
