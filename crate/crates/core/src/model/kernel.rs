use super::grid::SpatialGrid;
use crate::error::{Error, Result};
use crate::numerics::conv::roll;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelForm {
    Constant {
        value: f64,
    },
    /// `offset + amplitude · Σ_i cos(2π · mode · x_i / L)`
    Cosine {
        amplitude: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default = "one")]
        mode: u32,
    },
    /// Periodised difference of Gaussians centred at the origin.
    DifferenceOfGaussians {
        excitation: f64,
        excitation_width: f64,
        inhibition: f64,
        inhibition_width: f64,
    },
    /// Raw samples on the spatial grid, row-major.
    Samples {
        values: Vec<f64>,
    },
}

/// Connectivity `W` sampled on a spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectivityKernel {
    pub form: KernelForm,
    pub grid: SpatialGrid,
    pub samples: Vec<f64>,
    /// multiplicative factor applied to `form`
    pub scale: f64,
    /// integer grid translation applied to `form`
    pub shift: Vec<i64>,
}

impl ConnectivityKernel {
    pub fn new(form: KernelForm, grid: &SpatialGrid) -> Result<Self> {
        let l = grid.length;
        let samples: Vec<f64> = match &form {
            KernelForm::Constant { value } => vec![*value; grid.cells()],
            KernelForm::Cosine {
                amplitude,
                offset,
                mode,
            } => (0..grid.cells())
                .map(|f| {
                    let s: f64 = grid
                        .point(f)
                        .iter()
                        .map(|x| (2.0 * PI * *mode as f64 * x / l).cos())
                        .sum();
                    offset + amplitude * s
                })
                .collect(),
            KernelForm::DifferenceOfGaussians {
                excitation,
                excitation_width,
                inhibition,
                inhibition_width,
            } => {
                if !(*excitation_width > 0.0 && *inhibition_width > 0.0) {
                    return Err(Error::InvalidConfig(
                        "Gaussian widths must be positive".into(),
                    ));
                }
                (0..grid.cells())
                    .map(|f| {
                        let x = grid.point(f);
                        let mut acc = 0.0;
                        let images: Vec<Vec<f64>> = if grid.d == 1 {
                            (-4..=4).map(|m| vec![x[0] - m as f64 * l]).collect()
                        } else {
                            let mut v = Vec::new();
                            for a in -4..=4 {
                                for b in -4..=4 {
                                    v.push(vec![x[0] - a as f64 * l, x[1] - b as f64 * l]);
                                }
                            }
                            v
                        };
                        for y in images {
                            let r2: f64 = y.iter().map(|v| v * v).sum();
                            acc += excitation * (-r2 / (2.0 * excitation_width.powi(2))).exp()
                                - inhibition * (-r2 / (2.0 * inhibition_width.powi(2))).exp();
                        }
                        acc
                    })
                    .collect()
            }
            KernelForm::Samples { values } => {
                if values.len() != grid.cells() {
                    return Err(Error::GridMismatch(format!(
                        "kernel has {} samples, grid has {} cells",
                        values.len(),
                        grid.cells()
                    )));
                }
                values.clone()
            }
        };
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("kernel samples are not finite".into()));
        }
        Ok(ConnectivityKernel {
            form,
            grid: grid.clone(),
            samples,
            scale: 1.0,
            shift: vec![0; grid.d],
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut k = self.clone();
        k.scale *= factor;
        k.samples.iter_mut().for_each(|v| *v *= factor);
        k
    }

    /// `W(x - r)` with `r` given in grid steps.
    pub fn shifted(&self, r: &[i64]) -> Self {
        let mut k = self.clone();
        k.samples = roll(&self.samples, self.grid.n, self.grid.d, r);
        for (a, b) in k.shift.iter_mut().zip(r) {
            *a += b;
        }
        k
    }

    /// `W_0 = ∫ W`.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l1_norm(&self) -> f64 {
        self.samples.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.samples.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖∇W‖_∞`: analytic when available, otherwise central differences on the grid.
    pub fn grad_sup(&self) -> f64 {
        match &self.form {
            KernelForm::Constant { .. } => 0.0,
            KernelForm::Cosine {
                amplitude, mode, ..
            } => {
                (amplitude * self.scale).abs() * 2.0 * PI * *mode as f64 / self.grid.length
                    * (self.grid.d as f64).sqrt()
            }
            _ => self.grad_sup_grid(),
        }
    }

    pub fn grad_sup_grid(&self) -> f64 {
        let n = self.grid.n;
        let h = 2.0 * self.grid.dx();
        let w = &self.samples;
        let mut best: f64 = 0.0;
        for f in 0..self.grid.cells() {
            let idx = self.grid.index_of(f);
            let mut g2 = 0.0;
            for dim in 0..self.grid.d {
                let mut p = idx.clone();
                let mut m = idx.clone();
                p[dim] = (idx[dim] + 1) % n;
                m[dim] = (idx[dim] + n - 1) % n;
                let flat = |v: &Vec<usize>| {
                    if self.grid.d == 1 {
                        v[0]
                    } else {
                        v[0] * n + v[1]
                    }
                };
                let g = (w[flat(&p)] - w[flat(&m)]) / h;
                g2 += g * g;
            }
            best = best.max(g2.sqrt());
        }
        best
    }

    /// Largest `|W(x) - W(-x)|` over the grid.
    pub fn asymmetry(&self) -> f64 {
        let n = self.grid.n;
        let mut worst: f64 = 0.0;
        for f in 0..self.grid.cells() {
            let idx = self.grid.index_of(f);
            let neg: Vec<usize> = idx.iter().map(|&i| (n - i) % n).collect();
            let g = if self.grid.d == 1 {
                neg[0]
            } else {
                neg[0] * n + neg[1]
            };
            worst = worst.max((self.samples[f] - self.samples[g]).abs());
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() <= 1e-12 * (1.0 + self.sup_norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_norms() {
        let g = SpatialGrid::new(1, 1.0, 64).unwrap();
        let k = ConnectivityKernel::new(
            KernelForm::Cosine {
                amplitude: 2.0,
                offset: -0.5,
                mode: 1,
            },
            &g,
        )
        .unwrap();
        assert!((k.integral() + 0.5).abs() < 1e-13);
        assert!((k.l2_norm() - (0.25f64 + 2.0).sqrt()).abs() < 1e-13);
        assert!(k.is_symmetric());
        let fd = k.grad_sup_grid();
        assert!((fd - k.grad_sup()).abs() / k.grad_sup() < 1e-2);
    }

    #[test]
    fn shift_breaks_symmetry() {
        let g = SpatialGrid::new(2, 1.0, 16).unwrap();
        let k = ConnectivityKernel::new(
            KernelForm::DifferenceOfGaussians {
                excitation: 1.0,
                excitation_width: 0.1,
                inhibition: 0.5,
                inhibition_width: 0.3,
            },
            &g,
        )
        .unwrap();
        assert!(k.is_symmetric());
        let s = k.shifted(&[1, 0]);
        assert!(!s.is_symmetric());
        assert!((s.integral() - k.integral()).abs() < 1e-13);
    }

    #[test]
    fn sample_count_checked() {
        let g = SpatialGrid::new(1, 1.0, 8).unwrap();
        assert!(ConnectivityKernel::new(
            KernelForm::Samples {
                values: vec![0.0; 7]
            },
            &g
        )
        .is_err());
    }
}
