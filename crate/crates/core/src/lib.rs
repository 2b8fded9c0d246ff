//! Hessian-geometry toolkit: convex potentials and their Monge-Ampere
//! residuals, exponential families with exact moment maps, wavefunction
//! projections, invertible-polynomial mirror pairs, weighted moment maps
//! with torus fibrations, and symmetric-cone checks.

pub mod bhk;
pub mod cones;
pub mod error;
pub mod exec;
pub mod expfam;
pub mod hessian;
pub mod kvn;
pub mod potentials;
pub mod riemann;
pub mod sweep;
pub mod syz;

pub use error::{Error, Result};
