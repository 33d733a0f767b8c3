use super::grid::SpatialGrid;
use super::input::ExternalInput;
use super::kernel::ConnectivityKernel;
use super::modulation::ModulationFn;
use super::params::ModelParams;
use crate::numerics::conv::{roll, PeriodicConvolver};

/// Maps mean activities of `P` populations to their drifts
/// `Φ^β = Φ((1/P) Σ_β' (W^β' * ρ̄^β') + B^β(t))`, with `W^β'(x) = W(x - r^β')`.
#[derive(Clone, Debug)]
pub struct Coupling {
    pub phi: ModulationFn,
    pub grid: SpatialGrid,
    pub shifts: Vec<Vec<i64>>,
    pub inputs: Vec<ExternalInput>,
    pub kernel: ConnectivityKernel,
    conv: PeriodicConvolver,
}

impl Coupling {
    pub fn new(
        phi: ModulationFn,
        kernel: &ConnectivityKernel,
        shifts: Vec<Vec<i64>>,
        inputs: Vec<ExternalInput>,
    ) -> Self {
        assert_eq!(shifts.len(), inputs.len());
        let g = &kernel.grid;
        Coupling {
            phi,
            grid: g.clone(),
            shifts,
            inputs,
            kernel: kernel.clone(),
            conv: PeriodicConvolver::new(&kernel.samples, g.n, g.d, g.cell_volume()),
        }
    }

    pub fn single(p: &ModelParams) -> Self {
        Self::new(
            p.phi.clone(),
            &p.kernel,
            vec![vec![0; p.grid().d]],
            vec![p.input.clone()],
        )
    }

    /// The same coupling in units where `τ_c = σ = 1`.
    pub fn normalized(&self, sigma: f64, tau_c: f64) -> Self {
        let r = sigma.sqrt();
        Self::new(
            self.phi.scaled(1.0 / r),
            &self.kernel.scaled(r),
            self.shifts.clone(),
            self.inputs
                .iter()
                .map(|b| b.with_time_scale(tau_c))
                .collect(),
        )
    }

    pub fn populations(&self) -> usize {
        self.inputs.len()
    }

    /// Synaptic field `(1/P) Σ_β' W^β' * ρ̄^β'`.
    pub fn field(&self, means: &[Vec<f64>]) -> Vec<f64> {
        let (n, d) = (self.grid.n, self.grid.d);
        let np = self.populations();
        let mut acc = vec![0.0; self.grid.cells()];
        for (m, r) in means.iter().zip(&self.shifts) {
            let shifted = if r.iter().all(|&v| v == 0) {
                m.clone()
            } else {
                roll(m, n, d, r)
            };
            acc.iter_mut().zip(&shifted).for_each(|(a, b)| *a += b);
        }
        let mut out = self.conv.apply(&acc);
        if np > 1 {
            out.iter_mut().for_each(|v| *v /= np as f64);
        }
        out
    }

    pub fn drift(&self, t: f64, means: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let field = self.field(means);
        self.inputs
            .iter()
            .map(|b| {
                let bt = b.eval(t);
                field.iter().map(|v| self.phi.eval(v + bt)).collect()
            })
            .collect()
    }

    /// `Φ'` at the drift argument, per population.
    pub fn drift_slope(&self, t: f64, means: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let field = self.field(means);
        self.inputs
            .iter()
            .map(|b| {
                let bt = b.eval(t);
                field.iter().map(|v| self.phi.deriv(v + bt)).collect()
            })
            .collect()
    }
}

/// `Φ_ρ̄(x, t) = Φ(W * ρ̄(x) + B(t))`.
pub fn drift_field(mean: &[f64], p: &ModelParams, t: f64) -> Vec<f64> {
    Coupling::single(p)
        .drift(t, &[mean.to_vec()])
        .pop()
        .unwrap()
}
