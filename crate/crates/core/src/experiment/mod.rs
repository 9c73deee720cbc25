//! Configured experiments, their artifacts and the summary report.

mod artifacts;
mod config;
mod studies;

pub use artifacts::{
    bars, read_flux_csv, read_series_csv, run, summarize, RunOutcome, FITS_JSON, FLUX_CSV, IDENTITY_JSON,
    META_JSON, SERIES_CSV,
};
pub use config::{
    ConvergenceOpts, DecayOpts, Experiment, FluxOpts, GridConfig, MultiplierOpts, RunConfig, Schedule,
    ScatterOpts, SpectrumOpts,
};
pub use studies::*;
