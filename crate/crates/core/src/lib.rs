//! Solvers and diagnostics for a noisy neural field whose per-location activity
//! density obeys a nonlocal Fokker-Planck equation on the half-line.

pub mod direct;
pub mod equilibrium;
pub mod error;
pub mod gridcell;
pub mod model;
pub mod numerics;
pub mod perturb;
pub mod stability;
pub mod stefan;

pub use error::{Error, Result};
