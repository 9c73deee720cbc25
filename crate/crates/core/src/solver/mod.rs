//! Leapfrog time stepping, initial data and the linear propagator.

mod exponents;
mod initial;
mod leapfrog;
mod state;
mod trajectory;

pub use exponents::{make_exponents, Exponents};
pub use initial::{make_initial, smooth_step, InitialSpec, BOUNDARY_TAPER};
pub use leapfrog::{forcing, laplacian, Leapfrog};
pub use state::WaveState;
pub use trajectory::{
    evolve, evolve_from_spec, linear_propagate, read_snapshot_csv, run, steps_for,
    write_snapshot_csv, Observer, RunMeta, Trajectory,
};
