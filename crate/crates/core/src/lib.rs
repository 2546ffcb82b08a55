//! Wave-packet scattering off potential steps in one dimension, with the
//! ray-model prediction for how worldlines refract in the `(x, v0 t)` plane.
//!
//! Natural units `hbar = m = l = 1` are used throughout; see [`units`].
//!
//! - [`ray`]: refractive indices, group velocity, Snell-type laws, predicted rays.
//! - [`scattering`]: exact stationary states of the step.
//! - [`dynamics`]: time-dependent packets by spectral superposition, scalar and spinor.
//! - [`analysis`]: worldline fits and broadening diagnostics on simulated densities.
//! - [`io`]: run configuration, CSV/PGM output and the end-to-end runner behind the CLI.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod quadrature;
pub mod ray;
pub mod scattering;
pub mod units;

pub use error::{Error, Result};
