//! JSON run configuration: parsing, line-anchored validation, and resolution into solver inputs.

use crate::error::CliError;
use nfsf_core::direct::SolverConfig;
use nfsf_core::equilibrium::{homogeneous_branch, EquilibriumState};
use nfsf_core::gridcell::{snap_shift, PopulationSet};
use nfsf_core::model::{
    ActivityGrid, ConnectivityKernel, DensityField, ExternalInput, InputForm, KernelForm,
    ModelParams, ModulationFn, ModulationKind, SpatialGrid,
};
use nfsf_core::perturb::{perturb_equilibrium, SpatialPattern};
use nfsf_core::stability::PoincareMethod;
use nfsf_core::stefan::StefanConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stefan: Option<StefanConfig>,
    #[serde(default)]
    pub stability: StabilitySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gridcell: Option<GridcellSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub tau_c: f64,
    pub sigma: f64,
    pub modulation: ModulationKind,
    pub kernel: KernelForm,
    pub input: InputForm,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    pub length: f64,
    pub n_x: usize,
    pub n_s: usize,
    /// defaults to `Φ_max + 10√σ` along the expected trajectory
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Pattern {
    Mode {
        k: Vec<i64>,
    },
    /// random Fourier combination drawn from the run seed
    Random {
        k_max: i64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `ρ∞(1 + ε a(x)(s - s̄))` with relative entropy `relative_entropy`
    Equilibrium {
        #[serde(default)]
        relative_entropy: f64,
        #[serde(default = "default_pattern")]
        pattern: Pattern,
    },
    /// Gaussian in `s` centred at `center + modulation·cos(2π mode x₀ / L)`
    Bump {
        center: f64,
        width: f64,
        #[serde(default)]
        modulation: f64,
        #[serde(default = "one")]
        mode: i64,
    },
}

fn default_pattern() -> Pattern {
    Pattern::Random { k_max: 2 }
}
fn one() -> i64 {
    1
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Equilibrium {
            relative_entropy: 0.0,
            pattern: default_pattern(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    #[serde(default = "half")]
    pub alpha: f64,
    #[serde(default = "tenth")]
    pub epsilon: f64,
    #[serde(default = "tenth")]
    pub xi: f64,
    #[serde(default = "eight")]
    pub k_max: usize,
    #[serde(default = "numeric")]
    pub poincare: PoincareMethod,
}

fn half() -> f64 {
    0.5
}
fn tenth() -> f64 {
    0.1
}
fn eight() -> usize {
    8
}
fn numeric() -> PoincareMethod {
    PoincareMethod::Numeric
}

impl Default for StabilitySection {
    fn default() -> Self {
        StabilitySection {
            alpha: 0.5,
            epsilon: 0.1,
            xi: 0.1,
            k_max: 8,
            poincare: PoincareMethod::Numeric,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Direct,
    Stefan,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridcellSection {
    /// physical shift lengths, one vector per population, snapped to the grid
    pub shifts: Vec<Vec<f64>>,
    /// per-population inputs; the model input is used when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<InputForm>>,
    #[serde(default = "direct")]
    pub backend: Backend,
}

fn direct() -> Backend {
    Backend::Direct
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotFormat {
    Csv,
    Binary,
    Both,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "csv")]
    pub format: SnapshotFormat,
}

fn csv() -> SnapshotFormat {
    SnapshotFormat::Csv
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            format: SnapshotFormat::Csv,
        }
    }
}

/// Position of the key at `path` (dot separated) in `text`, found by walking the quoted key names.
pub fn locate(text: &str, path: &str) -> (usize, usize) {
    let mut pos = 0;
    for seg in path.split('.') {
        match text[pos..].find(&format!("\"{seg}\"")) {
            Some(i) => pos += i,
            None => break,
        }
    }
    let line = text[..pos].matches('\n').count() + 1;
    let column = pos - text[..pos].rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Everything a subcommand needs, built before any output is written.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub params: ModelParams,
    pub activity: ActivityGrid,
    pub equilibrium: EquilibriumState,
    pub initial: DensityField,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }

    /// Build and check every derived object; errors carry the line of the offending key.
    pub fn resolve(self, text: &str) -> Result<Resolved, CliError> {
        let fail = |path: &str, message: String| {
            let (line, column) = locate(text, path);
            CliError::Config {
                line,
                column,
                message: format!("{path}: {message}"),
            }
        };
        let m = &self.model;
        let g = &self.grid;
        if !(g.d == 1 || g.d == 2) {
            return Err(fail(
                "grid.d",
                format!("dimension must be 1 or 2, got {}", g.d),
            ));
        }
        let spatial = SpatialGrid::new(g.d, g.length, g.n_x)
            .map_err(|e| fail("grid.length", e.to_string()))?;
        let phi = ModulationFn::new(m.modulation.clone())
            .map_err(|e| fail("model.modulation", e.to_string()))?;
        let kernel = ConnectivityKernel::new(m.kernel.clone(), &spatial)
            .map_err(|e| fail("model.kernel", e.to_string()))?;
        let input =
            ExternalInput::new(m.input.clone()).map_err(|e| fail("model.input", e.to_string()))?;
        let key = if !(m.tau_c > 0.0) {
            "model.tau_c"
        } else {
            "model.sigma"
        };
        let params = ModelParams::new(m.tau_c, m.sigma, phi, kernel, input)
            .map_err(|e| fail(key, e.to_string()))?;

        let initial_mean = match &self.initial {
            InitialCondition::Bump {
                center, modulation, ..
            } => (center.abs() + modulation.abs()) / params.measure(),
            InitialCondition::Equilibrium { .. } => 0.0,
        };
        let s_max = g
            .s_max
            .unwrap_or_else(|| params.default_s_max(initial_mean));
        let activity =
            ActivityGrid::new(s_max, g.n_s).map_err(|e| fail("grid.n_s", e.to_string()))?;
        let equilibrium = homogeneous_branch(&params, Some(&activity))
            .map_err(|e| fail("model", format!("no stationary state: {e}")))?;

        if let Some(s) = &self.solver {
            s.validate().map_err(|e| fail("solver", e.to_string()))?;
        }
        if let Some(s) = &self.stefan {
            s.validate().map_err(|e| fail("stefan", e.to_string()))?;
        }
        let st = &self.stability;
        if !(st.alpha > 0.0 && st.alpha < 1.0) {
            return Err(fail(
                "stability.alpha",
                format!("must lie in (0, 1), got {}", st.alpha),
            ));
        }
        if !(st.xi >= 0.0 && st.xi < 0.5) {
            return Err(fail(
                "stability.xi",
                format!("must lie in [0, 1/2), got {}", st.xi),
            ));
        }
        if let Some(gc) = &self.gridcell {
            if gc.shifts.is_empty() || gc.shifts.iter().any(|r| r.len() != g.d) {
                return Err(fail(
                    "gridcell.shifts",
                    format!("need one {}-component shift per population", g.d),
                ));
            }
            if let Some(inputs) = &gc.inputs {
                if inputs.len() != gc.shifts.len() {
                    return Err(fail("gridcell.inputs", "need one input per shift".into()));
                }
                for b in inputs {
                    ExternalInput::new(b.clone())
                        .map_err(|e| fail("gridcell.inputs", e.to_string()))?;
                }
            }
        }

        let initial = match &self.initial {
            InitialCondition::Equilibrium {
                relative_entropy,
                pattern,
            } => {
                let rho_inf = equilibrium.profile(&spatial, &activity);
                let pattern = match pattern {
                    Pattern::Mode { k } if k.len() != g.d => {
                        return Err(fail(
                            "initial.pattern",
                            format!("mode needs {} components", g.d),
                        ))
                    }
                    Pattern::Mode { k } => SpatialPattern::Mode(k.clone()),
                    Pattern::Random { k_max } => SpatialPattern::Random {
                        k_max: *k_max,
                        seed: self.seed,
                    },
                };
                perturb_equilibrium(&rho_inf, &pattern, *relative_entropy)
                    .map_err(|e| fail("initial", e.to_string()))?
            }
            InitialCondition::Bump {
                center,
                width,
                modulation,
                mode,
            } => {
                if !(*width > 0.0) {
                    return Err(fail(
                        "initial.width",
                        format!("must be positive, got {width}"),
                    ));
                }
                let (c, w, a, k, l) = (*center, *width, *modulation, *mode as f64, g.length);
                DensityField::from_fn(&spatial, &activity, |x, s| {
                    let mid = c + a * (2.0 * std::f64::consts::PI * k * x[0] / l).cos();
                    (-(s - mid).powi(2) / (2.0 * w * w)).exp()
                })
                .map_err(|e| fail("initial", e.to_string()))?
            }
        };
        Ok(Resolved {
            config: self,
            params,
            activity,
            equilibrium,
            initial,
        })
    }
}

impl Resolved {
    pub fn solver_config(&self, text: &str) -> Result<SolverConfig, CliError> {
        self.config
            .solver
            .clone()
            .ok_or_else(|| missing(text, "solver"))
    }

    pub fn stefan_config(&self, text: &str) -> Result<StefanConfig, CliError> {
        self.config
            .stefan
            .clone()
            .ok_or_else(|| missing(text, "stefan"))
    }

    /// Populations for the four-population model, each started from the resolved initial field.
    pub fn population_set(&self, text: &str) -> Result<PopulationSet, CliError> {
        let gc = self
            .config
            .gridcell
            .as_ref()
            .ok_or_else(|| missing(text, "gridcell"))?;
        let grid = self.params.grid();
        let shifts: Vec<Vec<i64>> = gc.shifts.iter().map(|r| snap_shift(r, grid)).collect();
        let inputs = match &gc.inputs {
            Some(v) => v
                .iter()
                .map(|b| ExternalInput::new(b.clone()).expect("validated"))
                .collect(),
            None => vec![self.params.input.clone(); shifts.len()],
        };
        PopulationSet::new(vec![self.initial.clone(); shifts.len()], shifts, inputs).map_err(|e| {
            let (line, column) = locate(text, "gridcell");
            CliError::Config {
                line,
                column,
                message: e.to_string(),
            }
        })
    }
}

fn missing(text: &str, section: &str) -> CliError {
    let (line, column) = locate(text, section);
    CliError::Config {
        line,
        column,
        message: format!("this subcommand needs a \"{section}\" section"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
  "model": {
    "tau_c": 1.0,
    "sigma": 0.5,
    "modulation": { "kind": "smoothed-rectifier", "gain": 1.0, "width": 0.5 },
    "kernel": { "kind": "cosine", "amplitude": 0.5 },
    "input": { "kind": "constant", "value": 1.0 }
  },
  "grid": { "d": 1, "length": 1.0, "n_x": 8, "n_s": 80 },
  "solver": { "dt": 0.01, "t_end": 0.1 }
}"#;

    #[test]
    fn minimal_resolves_with_defaults() {
        let r = RunConfig::parse(MINIMAL).unwrap().resolve(MINIMAL).unwrap();
        assert_eq!(r.config.stability.alpha, 0.5);
        assert_eq!(r.initial.values.len(), 8 * 80);
        // the resolved copy parses back to the same config
        let again = RunConfig::parse(&r.config.to_json()).unwrap();
        assert_eq!(again.to_json(), r.config.to_json());
    }

    #[test]
    fn unknown_key_is_line_anchored() {
        let text = MINIMAL.replace("\"n_s\": 80", "\"n_s\": 80, \"bogus\": 1");
        match RunConfig::parse(&text) {
            Err(CliError::Config { line, message, .. }) => {
                assert_eq!(line, 9);
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_error_points_at_key() {
        let text = MINIMAL.replace("\"sigma\": 0.5", "\"sigma\": -0.5");
        match RunConfig::parse(&text).unwrap().resolve(&text) {
            Err(CliError::Config { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.starts_with("model.sigma"));
            }
            other => panic!("{other:?}"),
        }
    }
}
