//! Energy-momentum tensor, currents and vector-field multipliers, with
//! checks of their divergence and flux identities on computed solutions.

mod fields;
mod spherical;

pub use fields::{
    current, current_sample, energy_momentum, eval_mixed, eval_x0, eval_x0_at, eval_x1, eval_x2,
    CurrentSample, FieldId, MultiplierEval, METRIC,
};
pub use spherical::{
    boundary_flux_xr, flux_sweep, spherical_x, write_flux_csv, FluxRow, FluxValue, SphericalSample,
    SphericalTable,
};

mod divergence;
mod probe;

pub use divergence::{divergence_check, DivRegion, DivergenceReport};
pub use probe::MultiplierField;

mod identity;

pub use identity::{
    energy_identity_check, energy_identity_run, identity_report, identity_sample, IdentityObserver,
    IdentityReport, IdentitySample,
};
