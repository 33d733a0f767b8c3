use super::{alpha, t_of_tau, TauMesh};
use crate::error::{Error, Result};
use crate::model::Coupling;

/// Boundary positions are declared blown up beyond this magnitude.
pub const GAMMA_LIMIT: f64 = 1e8;

/// `γ` and `Ψ` at the nodes of one window, indexed `[population][x][node]`.
#[derive(Clone, Debug)]
pub struct GammaPath {
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub psi: Vec<Vec<Vec<f64>>>,
}

/// `Ψ^β = Φ(α (1/P) Σ W^β' * (ū^β' - γ^β' m) + B^β(t)) α` for a normalised coupling.
pub(crate) fn psi(
    coupling: &Coupling,
    mass: f64,
    tau: f64,
    ubar: &[Vec<f64>],
    gamma: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let a = alpha(tau);
    let means: Vec<Vec<f64>> = ubar
        .iter()
        .zip(gamma)
        .map(|(u, g)| u.iter().zip(g).map(|(u, g)| a * (u - g * mass)).collect())
        .collect();
    let mut out = coupling.drift(t_of_tau(tau), &means);
    out.iter_mut().flatten().for_each(|v| *v *= a);
    out
}

/// RK4 for `∂γ/∂τ = -Ψ` across a window, with `ū` linear between nodes.
///
/// `ubar[β][x][j]` holds the first moment at node `j` of `mesh`; `mass` is the
/// per-location mass `1/L^d`.
pub fn integrate_gamma(
    ubar: &[Vec<Vec<f64>>],
    gamma_start: &[Vec<f64>],
    coupling: &Coupling,
    mass: f64,
    mesh: &TauMesh,
) -> Result<GammaPath> {
    let np = ubar.len();
    let nx = gamma_start[0].len();
    let at = |j: usize| -> Vec<Vec<f64>> {
        ubar.iter()
            .map(|p| p.iter().map(|r| r[j]).collect())
            .collect()
    };
    let mut gamma: Vec<Vec<Vec<f64>>> = vec![vec![Vec::with_capacity(mesh.nodes + 1); nx]; np];
    let mut psis = gamma.clone();
    let mut g: Vec<Vec<f64>> = gamma_start.to_vec();
    let mut u_a = at(0);
    let mut ps = psi(coupling, mass, mesh.tau(0), &u_a, &g);
    let record = |gamma: &mut Vec<Vec<Vec<f64>>>,
                  psis: &mut Vec<Vec<Vec<f64>>>,
                  g: &[Vec<f64>],
                  ps: &[Vec<f64>]| {
        for b in 0..np {
            for x in 0..nx {
                gamma[b][x].push(g[b][x]);
                psis[b][x].push(ps[b][x]);
            }
        }
    };
    record(&mut gamma, &mut psis, &g, &ps);
    let h = mesh.dtau;
    let axpy = |g: &[Vec<f64>], k: &[Vec<f64>], c: f64| -> Vec<Vec<f64>> {
        g.iter()
            .zip(k)
            .map(|(g, k)| g.iter().zip(k).map(|(g, k)| g - c * k).collect())
            .collect()
    };
    for j in 0..mesh.nodes {
        let u_b = at(j + 1);
        let u_m: Vec<Vec<f64>> = u_a
            .iter()
            .zip(&u_b)
            .map(|(a, b)| a.iter().zip(b).map(|(a, b)| 0.5 * (a + b)).collect())
            .collect();
        let (ta, tm, tb) = (mesh.tau(j), mesh.tau(j) + 0.5 * h, mesh.tau(j + 1));
        let k1 = &ps;
        let k2 = psi(coupling, mass, tm, &u_m, &axpy(&g, k1, 0.5 * h));
        let k3 = psi(coupling, mass, tm, &u_m, &axpy(&g, &k2, 0.5 * h));
        let k4 = psi(coupling, mass, tb, &u_b, &axpy(&g, &k3, h));
        for b in 0..np {
            for x in 0..nx {
                g[b][x] -= h / 6.0 * (k1[b][x] + 2.0 * k2[b][x] + 2.0 * k3[b][x] + k4[b][x]);
            }
        }
        if g.iter()
            .flatten()
            .any(|v| !v.is_finite() || v.abs() > GAMMA_LIMIT)
        {
            return Err(Error::BlowUp { tau: ta });
        }
        ps = psi(coupling, mass, tb, &u_b, &g);
        record(&mut gamma, &mut psis, &g, &ps);
        u_a = u_b;
    }
    Ok(GammaPath { gamma, psi: psis })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn coupling(phi: ModulationFn, kernel: KernelForm, b: f64, n: usize) -> Coupling {
        let g = SpatialGrid::new(1, 1.0, n).unwrap();
        let k = ConnectivityKernel::new(kernel, &g).unwrap();
        Coupling::new(phi, &k, vec![vec![0]], vec![ExternalInput::constant(b)])
    }

    #[test]
    fn zero_modulation_freezes_boundary() {
        let c = coupling(
            ModulationFn::linear(0.0, 0.0),
            KernelForm::Constant { value: 2.0 },
            1.0,
            4,
        );
        let mesh = TauMesh::new(0.0, 0.01, 50).unwrap();
        let ubar = vec![vec![vec![0.7; 51]; 4]];
        let path = integrate_gamma(&ubar, &[vec![0.3, -0.1, 0.0, 2.0]], &c, 1.0, &mesh).unwrap();
        for (x, g0) in [0.3, -0.1, 0.0, 2.0].iter().enumerate() {
            assert!(path.gamma[0][x].iter().all(|g| g == g0));
            assert!(path.psi[0][x].iter().all(|p| *p == 0.0));
        }
    }

    #[test]
    fn constant_modulation_has_closed_form() {
        let cval = 1.7;
        let c = coupling(
            ModulationFn::linear(0.0, cval),
            KernelForm::Cosine {
                amplitude: 3.0,
                offset: 1.0,
                mode: 1,
            },
            0.0,
            8,
        );
        let mesh = TauMesh::new(0.5, 1e-3, 1000).unwrap();
        let ubar: Vec<Vec<f64>> = (0..8)
            .map(|x| (0..=1000).map(|j| (x + j) as f64 * 1e-3).collect())
            .collect();
        let path = integrate_gamma(&[ubar], &[vec![0.25; 8]], &c, 1.0, &mesh).unwrap();
        for j in (0..=1000).step_by(50) {
            let tau = mesh.tau(j);
            let exact = 0.25 - cval * ((2.0 * tau + 1.0).sqrt() - 2.0f64.sqrt());
            assert!((path.gamma[0][3][j] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_modulation_blows_up() {
        // γ' = -α³γ² with γ(0) = -5 diverges where 1 - α(τ) = 1/5, i.e. τ = 0.28125
        let mut x: Vec<f64> = (0..=600)
            .map(|i| 1e-3 * 1.04f64.powi(i))
            .filter(|v| *v < 1e9)
            .collect();
        x.extend(
            [0.0]
                .iter()
                .chain(x.clone().iter())
                .map(|v| -v)
                .collect::<Vec<_>>(),
        );
        x.sort_by(f64::total_cmp);
        x.dedup();
        let y = x.iter().map(|v| v * v).collect();
        let c = coupling(
            ModulationFn::new(ModulationKind::Tabulated { x, y }).unwrap(),
            KernelForm::Constant { value: 1.0 },
            0.0,
            2,
        );
        let mesh = TauMesh::new(0.0, 1e-3, 400).unwrap();
        let ubar = vec![vec![vec![0.0; 401]; 2]];
        match integrate_gamma(&ubar, &[vec![-5.0; 2]], &c, 1.0, &mesh) {
            Err(Error::BlowUp { tau }) => assert!(tau > 0.27 && tau < 0.2813, "{tau}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
