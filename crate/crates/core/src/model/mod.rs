//! Model parameters, grids, density fields and their file formats.

pub mod coupling;
pub mod density;
pub mod grid;
pub mod input;
pub mod io;
pub mod kernel;
pub mod modulation;
pub mod params;

pub use coupling::{drift_field, Coupling};
pub use density::{certify_initial, CompatibleInitialCondition, DensityField};
pub use grid::{ActivityGrid, SpatialGrid};
pub use input::{ExternalInput, InputForm};
pub use kernel::{ConnectivityKernel, KernelForm};
pub use modulation::{ModulationFn, ModulationKind, Sign};
pub use params::{normalize_parameters, ModelParams, RescaleMap};
