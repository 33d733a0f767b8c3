use super::grid::{ActivityGrid, SpatialGrid};
use crate::error::{Error, Result};

/// Density `ρ(x, s)` on a spatial grid times an activity grid, row-major in `(x, s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub spatial: SpatialGrid,
    pub activity: ActivityGrid,
    pub values: Vec<f64>,
    pub t: f64,
}

impl DensityField {
    pub fn zeros(spatial: &SpatialGrid, activity: &ActivityGrid) -> Self {
        DensityField {
            spatial: spatial.clone(),
            activity: activity.clone(),
            values: vec![0.0; spatial.cells() * activity.n_s],
            t: 0.0,
        }
    }

    /// Samples `f(x, s)` at cell centres and rescales each `x` to mass `1/L^d`.
    pub fn from_fn<F: Fn(&[f64], f64) -> f64>(
        spatial: &SpatialGrid,
        activity: &ActivityGrid,
        f: F,
    ) -> Result<Self> {
        let mut rho = Self::zeros(spatial, activity);
        let centers = activity.centers();
        for x in 0..spatial.cells() {
            let p = spatial.point(x);
            for (v, &s) in rho.row_mut(x).iter_mut().zip(&centers) {
                *v = f(&p, s);
            }
        }
        rho.normalize_mass()?;
        Ok(rho)
    }

    pub fn n_s(&self) -> usize {
        self.activity.n_s
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let n = self.activity.n_s;
        &self.values[x * n..(x + 1) * n]
    }

    pub fn row_mut(&mut self, x: usize) -> &mut [f64] {
        let n = self.activity.n_s;
        &mut self.values[x * n..(x + 1) * n]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.values.chunks(self.activity.n_s)
    }

    pub fn target_mass(&self) -> f64 {
        1.0 / self.spatial.measure()
    }

    pub fn normalize_mass(&mut self) -> Result<()> {
        let target = self.target_mass();
        let ds = self.activity.ds();
        for x in 0..self.spatial.cells() {
            let row = self.row_mut(x);
            if row.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::InvalidConfig(
                    "initial density must be finite and nonnegative".into(),
                ));
            }
            let m: f64 = row.iter().sum::<f64>() * ds;
            if !(m > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "initial density has zero mass at x index {x}"
                )));
            }
            row.iter_mut().for_each(|v| *v *= target / m);
        }
        Ok(())
    }

    pub fn mass_per_x(&self) -> Vec<f64> {
        let ds = self.activity.ds();
        self.rows().map(|r| r.iter().sum::<f64>() * ds).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_per_x().iter().sum::<f64>() * self.spatial.cell_volume()
    }

    /// Worst relative deviation of the per-x mass from `1/L^d`.
    pub fn mass_error(&self) -> f64 {
        let target = self.target_mass();
        self.mass_per_x()
            .iter()
            .fold(0.0, |m, v| m.max((v - target).abs() / target))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `ρ̄(x) = ∫ s ρ(x, s) ds`.
    pub fn mean_activity(&self) -> Vec<f64> {
        let ds = self.activity.ds();
        let centers = self.activity.centers();
        self.rows()
            .map(|r| r.iter().zip(&centers).map(|(v, s)| v * s).sum::<f64>() * ds)
            .collect()
    }

    /// `∫ h(s) ρ(x, s) ds` for each `x`.
    pub fn moment<H: Fn(f64) -> f64>(&self, h: H) -> Vec<f64> {
        let ds = self.activity.ds();
        let hs: Vec<f64> = self.activity.centers().into_iter().map(h).collect();
        self.rows()
            .map(|r| r.iter().zip(&hs).map(|(v, h)| v * h).sum::<f64>() * ds)
            .collect()
    }

    /// Trace `ρ(x, 0)` by linear extrapolation from the first two cells.
    pub fn boundary_trace(&self) -> Vec<f64> {
        self.rows().map(|r| 1.5 * r[0] - 0.5 * r[1]).collect()
    }

    pub fn check_same_grid(&self, other: &DensityField) -> Result<()> {
        if self.spatial != other.spatial || self.activity != other.activity {
            return Err(Error::GridMismatch(
                "density fields live on different grids".into(),
            ));
        }
        Ok(())
    }

    /// `∫∫ |ρ - ρ'| ds dx`.
    pub fn l1_distance(&self, other: &DensityField) -> Result<f64> {
        self.check_same_grid(other)?;
        let w = self.activity.ds() * self.spatial.cell_volume();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * w)
    }

    pub fn sup_distance(&self, other: &DensityField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Evidence that a density decays fast enough in `s` to be an admissible initial state.
#[derive(Clone, Debug)]
pub struct CompatibleInitialCondition {
    pub rho: DensityField,
    pub tail_moment: f64,
    pub tail_gradient: f64,
}

/// Checks `|ρ s^4|` and `|∂_s ρ s^4|` over the upper quarter of the activity range.
pub fn certify_initial(rho: &DensityField, threshold: f64) -> Result<CompatibleInitialCondition> {
    let ds = rho.activity.ds();
    let start = (3 * rho.n_s()) / 4;
    let mut tm: f64 = 0.0;
    let mut tg: f64 = 0.0;
    for r in rho.rows() {
        for j in start..rho.n_s() {
            let s4 = rho.activity.center(j).powi(4);
            tm = tm.max(r[j].abs() * s4);
            if j + 1 < rho.n_s() {
                tg = tg.max(((r[j + 1] - r[j]) / ds).abs() * s4);
            }
        }
    }
    if rho.mass_error() > 1e-10 {
        return Err(Error::InvalidConfig(format!(
            "initial per-x mass off by {:.3e}",
            rho.mass_error()
        )));
    }
    if rho.min_value() < 0.0 {
        return Err(Error::InvalidConfig(
            "initial density is negative somewhere".into(),
        ));
    }
    if tm > threshold || tg > threshold {
        return Err(Error::InvalidConfig(format!(
            "initial density tail too heavy: |rho s^4| = {tm:.3e}, |rho' s^4| = {tg:.3e}"
        )));
    }
    Ok(CompatibleInitialCondition {
        rho: rho.clone(),
        tail_moment: tm,
        tail_gradient: tg,
    })
}
