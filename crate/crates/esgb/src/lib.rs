//! Simulator and certification toolkit for a flat FLRW cosmology with a
//! massless scalar field coupled quadratically to the Gauss-Bonnet density.
//!
//! The reduced system evolves (a, H, phi, Phi) where Phi is the scalar
//! velocity. A momentum constraint ties the variables together at every
//! instant; initial data is built exactly on the constraint surface and the
//! flow preserves it, so the propagated constraint residual doubles as an
//! integration quality gauge.
//!
//! Beyond raw integration the crate ships the closed-form envelopes that
//! bracket every solution launched from admissible data, the sign-definite
//! auxiliary quantities that drive those envelopes, and a registry of scalar
//! comparison problems that lets each closed form be cross-checked against
//! direct numerical integration of its own defining ODE.

pub mod cli;
pub mod csv_io;
pub mod envelopes;
pub mod field_equations;
pub mod initial_data;
pub mod integrator;
pub mod oracles;
pub mod plot;

pub use field_equations::{CosmoState, RhsValue};
