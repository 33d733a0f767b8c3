use crate::error::{Error, Result};

/// A window `[τ_k, τ_k + nodes·Δτ]` of the uniform self-similar time mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauMesh {
    pub start: f64,
    pub dtau: f64,
    pub nodes: usize,
}

impl TauMesh {
    pub fn new(start: f64, dtau: f64, nodes: usize) -> Result<Self> {
        if !(dtau > 0.0) || nodes == 0 {
            return Err(Error::InvalidConfig("empty τ-window".into()));
        }
        if nodes as f64 * dtau > 1.0 + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "τ-window of length {} exceeds 1",
                nodes as f64 * dtau
            )));
        }
        Ok(TauMesh { start, dtau, nodes })
    }

    pub fn tau(&self, j: usize) -> f64 {
        self.start + j as f64 * self.dtau
    }

    pub fn end(&self) -> f64 {
        self.tau(self.nodes)
    }
}

/// Product-integration weights on a uniform mesh for `∫_0^{τ_m} f(η) (τ_m - η)^p dη`
/// with `f` piecewise linear and `p ∈ {-1/2, 1/2}`; they depend only on the lag `m - i`.
#[derive(Clone, Debug)]
pub struct ProductWeights {
    pub dtau: f64,
    /// `(left, right)` endpoint weights of the interval whose far end has lag `l`
    inv_sqrt: Vec<(f64, f64)>,
    sqrt: Vec<(f64, f64)>,
}

/// Endpoint weights on `[η_a, η_b]` with `A = √(τ - η_a)`, `B = √(τ - η_b)`.
fn interval_inv_sqrt(a: f64, b: f64, h: f64) -> (f64, f64) {
    let d = a - b;
    let wb = 2.0 / 3.0 * d * d * (2.0 * a + b) / h;
    (2.0 * d - wb, wb)
}

fn interval_sqrt(a: f64, b: f64, h: f64) -> (f64, f64) {
    let d = a - b;
    let j0 = 2.0 / 3.0 * d * (a * a + a * b + b * b);
    let r = (3.0 * b * b * b + 6.0 * a * b * b + 4.0 * a * a * b + 2.0 * a * a * a) / 15.0;
    let wb = 2.0 * d * d * r / h;
    (j0 - wb, wb)
}

impl ProductWeights {
    pub fn new(dtau: f64, lags: usize) -> Self {
        let mut w = ProductWeights {
            dtau,
            inv_sqrt: vec![(0.0, 0.0)],
            sqrt: vec![(0.0, 0.0)],
        };
        w.ensure(lags);
        w
    }

    pub fn ensure(&mut self, lags: usize) {
        let h = self.dtau;
        for l in self.inv_sqrt.len()..=lags {
            let a = (l as f64 * h).sqrt();
            let b = ((l - 1) as f64 * h).sqrt();
            self.inv_sqrt.push(interval_inv_sqrt(a, b, h));
            self.sqrt.push(interval_sqrt(a, b, h));
        }
    }

    pub fn lags(&self) -> usize {
        self.inv_sqrt.len() - 1
    }

    #[inline]
    fn node(table: &[(f64, f64)], m: usize, i: usize) -> f64 {
        let l = m - i;
        let mut w = 0.0;
        if i < m {
            w += table[l].0;
        }
        if i > 0 {
            w += table[l + 1].1;
        }
        w
    }

    /// Weight of node `i` in `∫_0^{τ_m} f (τ_m - η)^{-1/2} dη`.
    #[inline]
    pub fn inv_sqrt(&self, m: usize, i: usize) -> f64 {
        Self::node(&self.inv_sqrt, m, i)
    }

    /// Weight of node `i` in `∫_0^{τ_m} f (τ_m - η)^{1/2} dη`.
    #[inline]
    pub fn sqrt(&self, m: usize, i: usize) -> f64 {
        Self::node(&self.sqrt, m, i)
    }

    /// Trapezoid weight of node `i` in `∫_0^{τ_m} f dη`.
    #[inline]
    pub fn plain(&self, m: usize, i: usize) -> f64 {
        if i == 0 || i == m {
            0.5 * self.dtau
        } else {
            self.dtau
        }
    }
}
