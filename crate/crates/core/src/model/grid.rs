use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform periodic grid on the torus `[0, L)^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub d: usize,
    pub length: f64,
    pub n: usize,
}

impl SpatialGrid {
    pub fn new(d: usize, length: f64, n: usize) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::InvalidConfig(format!(
                "dimension must be 1 or 2, got {d}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "domain length must be positive, got {length}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 points per dimension, got {n}"
            )));
        }
        Ok(SpatialGrid { d, length, n })
    }

    pub fn cells(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }

    /// `L^d`.
    pub fn measure(&self) -> f64 {
        self.length.powi(self.d as i32)
    }

    pub fn index_of(&self, flat: usize) -> Vec<usize> {
        if self.d == 1 {
            vec![flat]
        } else {
            vec![flat / self.n, flat % self.n]
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.index_of(flat)
            .into_iter()
            .map(|i| i as f64 * self.dx())
            .collect()
    }
}

/// Finite-volume grid on `[0, s_max]` with cell centres `(j + 1/2) Δs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityGrid {
    pub s_max: f64,
    pub n_s: usize,
}

pub const MIN_ACTIVITY_CELLS: usize = 32;

impl ActivityGrid {
    pub fn new(s_max: f64, n_s: usize) -> Result<Self> {
        if n_s < MIN_ACTIVITY_CELLS {
            return Err(Error::InvalidConfig(format!(
                "activity grid needs at least {MIN_ACTIVITY_CELLS} cells, got {n_s}"
            )));
        }
        if !(s_max > 0.0) || !s_max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "s_max must be positive, got {s_max}"
            )));
        }
        Ok(ActivityGrid { s_max, n_s })
    }

    /// Smallest grid with spacing `ds` covering `[0, s_min]`.
    pub fn with_spacing(s_min: f64, ds: f64) -> Result<Self> {
        let n_s = ((s_min / ds) - 1e-9).ceil().max(MIN_ACTIVITY_CELLS as f64) as usize;
        Self::new(n_s as f64 * ds, n_s)
    }

    /// Truncation rule `s_max >= Φ_max + 10 √σ`.
    pub fn required_s_max(phi_max: f64, sigma: f64) -> f64 {
        phi_max.max(0.0) + 10.0 * sigma.sqrt()
    }

    pub fn ds(&self) -> f64 {
        self.s_max / self.n_s as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.ds()
    }

    /// Right face of cell `j`.
    pub fn face(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.ds()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_s).map(|j| self.center(j)).collect()
    }
}
