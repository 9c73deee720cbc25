//! Simulation and diagnostics for the defocusing semilinear wave equation
//! `□φ = -|φ|^{p-1}φ` outside a star-shaped planar obstacle with Dirichlet
//! boundary conditions.

pub mod error;
pub mod functionals;
pub mod experiment;
pub mod geometry;
pub mod multiplier;
pub mod quadrature;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
