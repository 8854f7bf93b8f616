//! Numerical core: torus kernels, scale decomposition of the lattice Green
//! function, flow coefficients and the second-order coupling flow.

pub mod coeffs;
pub mod decomp;
pub mod error;
pub mod fft;
pub mod flow;
pub mod lattice;
pub mod window;

pub use error::{CoreError, Result};
