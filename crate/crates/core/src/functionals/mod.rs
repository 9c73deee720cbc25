//! Scalar diagnostics evaluated on wave states.

mod decay;
mod diff;
mod energy;
mod norms;
mod scattering;

pub use decay::{default_window, fit_decay, linear_fit, write_series_csv, DecayFit, EnergySeries};
pub use diff::{edge_energy, edge_product, gradient, hessian, node_sum, Gradient};
pub use energy::{
    conformal_components, conformal_energy, energy, energy_components, ked_report, leapfrog_energy,
    sup_by_region, sup_on_ray, weighted_energy, weighted_potential, weighted_potential_with,
    ConformalParts, EnergyParts, KedReport,
};
pub use norms::{suitable_pair, xhs_norm};
pub use scattering::{residual_between, scattering_residual, scattering_residuals, ResidualNorm};
