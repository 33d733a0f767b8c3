//! Numerical building blocks shared by the solvers.

pub mod conv;
pub mod fourier;
pub mod heat;
pub mod linalg;
pub mod quad;
pub mod special;

pub use heat::{
    brick1, brick2, heat_kernel, heat_kernel_dxi, heat_kernel_moments, PiecewiseLinear,
};
pub use special::{erf, erfc, erfcx, half_line_gaussian_integral};
