//! Perturbations `ρ∞(1 + ε g)` of a stationary profile with `Σ_s g ρ∞ = 0` at every `x`,
//! so per-x mass is untouched and the relative entropy is exactly `ε² Σ g² ρ∞`.

use crate::error::{Error, Result};
use crate::model::DensityField;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Spatial pattern `a(x)` of the perturbation.
#[derive(Clone, Debug, PartialEq)]
pub enum SpatialPattern {
    /// `cos(2π k·x / L)`
    Mode(Vec<i64>),
    /// random combination of the modes with `|k|_∞ ≤ k_max`, constant mode included
    Random { k_max: i64, seed: u64 },
}

fn modes(d: usize, k_max: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|m| (-k_max..=k_max).map(move |k| [m.clone(), vec![k]].concat()))
            .collect();
    }
    out
}

fn spatial_values(rho_inf: &DensityField, pattern: &SpatialPattern) -> Vec<f64> {
    let g = &rho_inf.spatial;
    let phase = |k: &[i64], x: &[f64]| {
        2.0 * PI * k.iter().zip(x).map(|(k, x)| *k as f64 * x).sum::<f64>() / g.length
    };
    let points: Vec<Vec<f64>> = (0..g.cells()).map(|i| g.point(i)).collect();
    match pattern {
        SpatialPattern::Mode(k) => points.iter().map(|x| phase(k, x).cos()).collect(),
        SpatialPattern::Random { k_max, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let terms: Vec<(Vec<i64>, f64, f64)> = modes(g.d, *k_max)
                .into_iter()
                .map(|k| {
                    let a = rng.gen_range(-1.0..1.0);
                    let p = rng.gen_range(0.0..2.0 * PI);
                    (k, a, p)
                })
                .collect();
            points
                .iter()
                .map(|x| {
                    terms
                        .iter()
                        .map(|(k, a, p)| a * (phase(k, x) + p).cos())
                        .sum()
                })
                .collect()
        }
    }
}

/// `ρ∞(1 + ε a(x) h(s))` with `h = s - s̄` centred against `ρ∞` and `ε` chosen so that
/// the discrete relative entropy equals `target_re`.
pub fn perturb_equilibrium(
    rho_inf: &DensityField,
    pattern: &SpatialPattern,
    target_re: f64,
) -> Result<DensityField> {
    if !(target_re >= 0.0) || !target_re.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "target relative entropy must be nonnegative, got {target_re}"
        )));
    }
    let a = spatial_values(rho_inf, pattern);
    let centers = rho_inf.activity.centers();
    let w = rho_inf.activity.ds() * rho_inf.spatial.cell_volume();
    let mut g = vec![0.0; rho_inf.values.len()];
    let mut norm = 0.0;
    for (x, row) in rho_inf.rows().enumerate() {
        let mass: f64 = row.iter().sum();
        let bar = row.iter().zip(&centers).map(|(r, s)| r * s).sum::<f64>() / mass;
        for (j, r) in row.iter().enumerate() {
            let v = a[x] * (centers[j] - bar);
            g[x * centers.len() + j] = v;
            norm += v * v * r * w;
        }
    }
    if norm == 0.0 {
        if target_re == 0.0 {
            return Ok(rho_inf.clone());
        }
        return Err(Error::InvalidConfig(
            "perturbation pattern vanishes on this grid".into(),
        ));
    }
    let eps = (target_re / norm).sqrt();
    let mut rho = rho_inf.clone();
    for (v, gi) in rho.values.iter_mut().zip(&g) {
        *v *= 1.0 + eps * gi;
    }
    if rho.min_value() < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "relative entropy {target_re} is too large for a positive perturbation"
        )));
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActivityGrid, SpatialGrid};
    use crate::stability::relative_entropy;

    fn profile(d: usize) -> DensityField {
        let g = SpatialGrid::new(d, 2.0, 8).unwrap();
        let a = ActivityGrid::new(6.0, 90).unwrap();
        DensityField::from_fn(&g, &a, |_, s| (-(s - 1.3f64).powi(2) / 1.2).exp()).unwrap()
    }

    #[test]
    fn hits_target_entropy_and_keeps_mass() {
        for d in [1, 2] {
            let rho_inf = profile(d);
            for pattern in [
                SpatialPattern::Mode(vec![1; d]),
                SpatialPattern::Random { k_max: 2, seed: 7 },
            ] {
                let rho = perturb_equilibrium(&rho_inf, &pattern, 1e-4).unwrap();
                let re = relative_entropy(&rho, &rho_inf).unwrap().value;
                assert!((re - 1e-4).abs() < 1e-16, "{re}");
                assert!(rho.mass_error() < 1e-14);
            }
        }
    }

    #[test]
    fn same_seed_same_field() {
        let rho_inf = profile(2);
        let a = perturb_equilibrium(
            &rho_inf,
            &SpatialPattern::Random { k_max: 1, seed: 3 },
            1e-3,
        )
        .unwrap();
        let b = perturb_equilibrium(
            &rho_inf,
            &SpatialPattern::Random { k_max: 1, seed: 3 },
            1e-3,
        )
        .unwrap();
        let c = perturb_equilibrium(
            &rho_inf,
            &SpatialPattern::Random { k_max: 1, seed: 4 },
            1e-3,
        )
        .unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn too_large_is_rejected() {
        assert!(perturb_equilibrium(&profile(1), &SpatialPattern::Mode(vec![1]), 50.0).is_err());
    }
}
