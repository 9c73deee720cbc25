use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::fields::{current, energy_momentum};
use super::probe::{FieldSlice, MultiplierField};
use crate::error::{Error, Result};
use crate::functionals::{gradient, node_sum};
use crate::geometry::{BoundaryPoint, Domain};
use crate::solver::{run, steps_for, Leapfrog, Observer, Trajectory, WaveState};

/// Boundary nodes used for the `∂K` integral.
const BOUNDARY_NODES: usize = 256;

/// The four terms of the multiplier identity at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentitySample {
    pub t: f64,
    /// `∫_{t} J₀`.
    pub j0: f64,
    /// `∫ ∂^μJ_μ` over the slice.
    pub bulk: f64,
    /// `∫_{∂K} J_N`.
    pub flux: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub field: MultiplierField,
    pub t_initial: f64,
    pub t_final: f64,
    pub j0_initial: f64,
    pub j0_final: f64,
    /// Time integral of the bulk term.
    pub bulk: f64,
    /// Time integral of the boundary term.
    pub flux: f64,
    /// `|J₀(T) + bulk - J₀(0) + flux| / |J₀(0)|`.
    pub residual: f64,
    pub samples: usize,
}

fn bilinear(domain: &Domain, f: &[f64], x: f64, y: f64) -> f64 {
    let g = &domain.grid;
    let fx = (x + g.half_width) / g.h;
    let fy = (y + g.half_width) / g.h;
    let i = (fx.floor().max(0.0) as usize).min(g.n - 2);
    let j = (fy.floor().max(0.0) as usize).min(g.n - 2);
    let (u, v) = (fx - i as f64, fy - j as f64);
    let k = g.index(i, j);
    (1.0 - u) * (1.0 - v) * f[k] + u * (1.0 - v) * f[k + 1] + (1.0 - u) * v * f[k + g.n]
        + u * v * f[k + g.n + 1]
}

/// `∂_Nφ` at a boundary point from a quadratic least-squares fit to
/// samples along the normal. The constant is left free: the staircase
/// solution vanishes on the obstacle nodes, not on the curve itself.
fn normal_derivative(domain: &Domain, f: &[f64], b: &BoundaryPoint) -> f64 {
    let h = domain.grid.h;
    let mut a = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for k in 1..=4 {
        let d = k as f64 * h;
        let v = bilinear(domain, f, b.point[0] + d * b.normal[0], b.point[1] + d * b.normal[1]);
        let row = Vector3::new(1.0, d, d * d);
        a += row * row.transpose();
        rhs += row * v;
    }
    a.lu().solve(&rhs).map_or(0.0, |c| c[1])
}

/// Linear flows only conserve the plain energy, so they accept `∂t` alone.
fn check_field(field: MultiplierField, nonlinear: bool) -> Result<()> {
    if field.is_radial() && (nonlinear || field == MultiplierField::Dt) {
        Ok(())
    } else {
        Err(Error::UnsupportedField(format!(
            "{} ({} flow)",
            field.name(),
            if nonlinear { "nonlinear" } else { "linear" }
        )))
    }
}

/// Evaluates the slice and boundary terms of the identity on one state.
/// For a linear flow the potential is left out of `T`.
pub fn identity_sample(state: &WaveState, field: MultiplierField, nonlinear: bool) -> Result<IdentitySample> {
    check_field(field, nonlinear)?;
    let domain = &state.domain;
    let g = &domain.grid;
    let p = state.exponents.p;
    let slice = FieldSlice::new(field, state.t, p, g.half_width * std::f64::consts::SQRT_2 + g.h, g.h);
    let grad = gradient(domain, &state.phi);
    let outside = AtomicUsize::new(0);
    let dphi_at = |k: usize| [state.phit[k], grad.dx[k], grad.dy[k]];

    let j0 = node_sum(domain, |k, x, y| {
        let phi = state.phi[k];
        let dphi = dphi_at(k);
        match slice.local(x, y) {
            Some(l) => {
                let t = energy_momentum(dphi, if nonlinear { phi } else { 0.0 }, p);
                current(&t, l.x, l.chi, l.dchi, phi, dphi)[0]
            }
            None => {
                if phi.abs().max(dphi[0].abs()) > 1e-10 {
                    outside.fetch_add(1, Ordering::Relaxed);
                }
                0.0
            }
        }
    });
    let bulk = node_sum(domain, |k, x, y| {
        slice.closed_div(x, y, state.phi[k], dphi_at(k)).unwrap_or(0.0)
    });
    if outside.load(Ordering::Relaxed) > 0 {
        if let MultiplierField::Spherical { r_shift } = field {
            return Err(Error::RegimeViolation {
                t: state.t,
                r: state.support_radius(1e-10),
                r_shift,
            });
        }
    }

    let mut flux = 0.0;
    if let Some(profile) = &domain.profile {
        for b in profile.boundary_quadrature(BOUNDARY_NODES) {
            let l = slice.local(b.point[0], b.point[1]).ok_or(Error::RegimeViolation {
                t: state.t,
                r: b.point[0].hypot(b.point[1]),
                r_shift: match field {
                    MultiplierField::Spherical { r_shift } => r_shift,
                    _ => 0.0,
                },
            })?;
            let xn = l.x[1] * b.normal[0] + l.x[2] * b.normal[1];
            let dn = normal_derivative(domain, &state.phi, &b);
            flux += b.weight * 0.5 * xn * dn * dn;
        }
    }
    Ok(IdentitySample {
        t: state.t,
        j0,
        bulk,
        flux,
    })
}

/// Assembles the identity from samples ordered in time (trapezoid in `t`).
pub fn identity_report(field: MultiplierField, samples: &[IdentitySample]) -> Result<IdentityReport> {
    let first = samples.first().ok_or(Error::InsufficientData(0))?;
    let last = samples.last().expect("non-empty");
    let mut bulk = 0.0;
    let mut flux = 0.0;
    for w in samples.windows(2) {
        let dt = w[1].t - w[0].t;
        bulk += 0.5 * dt * (w[0].bulk + w[1].bulk);
        flux += 0.5 * dt * (w[0].flux + w[1].flux);
    }
    let mismatch = (last.j0 + bulk - first.j0 + flux).abs();
    let residual = if first.j0 != 0.0 {
        mismatch / first.j0.abs()
    } else {
        mismatch
    };
    Ok(IdentityReport {
        field,
        t_initial: first.t,
        t_final: last.t,
        j0_initial: first.j0,
        j0_final: last.j0,
        bulk,
        flux,
        residual,
        samples: samples.len(),
    })
}

/// Identity check over the stored snapshots of a trajectory.
pub fn energy_identity_check(traj: &Trajectory, field: MultiplierField) -> Result<IdentityReport> {
    let nonlinear = traj.meta.nonlinear;
    check_field(field, nonlinear)?;
    let samples = traj
        .snapshots
        .iter()
        .map(|s| identity_sample(s, field, nonlinear))
        .collect::<Result<Vec<_>>>()?;
    identity_report(field, &samples)
}

/// Samples the identity terms while the solver runs, every `stride` steps
/// and at the last step, without storing states.
pub struct IdentityObserver {
    field: MultiplierField,
    nonlinear: bool,
    stride: usize,
    total: usize,
    seen: usize,
    samples: Vec<IdentitySample>,
}

impl IdentityObserver {
    pub fn new(field: MultiplierField, nonlinear: bool, stride: usize, total_steps: usize) -> Result<Self> {
        check_field(field, nonlinear)?;
        Ok(Self {
            field,
            nonlinear,
            stride: stride.max(1),
            total: total_steps,
            seen: 0,
            samples: Vec::new(),
        })
    }

    pub fn samples(&self) -> &[IdentitySample] {
        &self.samples
    }

    pub fn finish(self) -> Result<IdentityReport> {
        identity_report(self.field, &self.samples)
    }
}

impl Observer for IdentityObserver {
    fn observe(&mut self, lf: &Leapfrog) -> Result<()> {
        let k = self.seen;
        self.seen += 1;
        if k % self.stride == 0 || k == self.total {
            self.samples.push(identity_sample(&lf.state(), self.field, self.nonlinear)?);
        }
        Ok(())
    }
}

/// Runs the solver from `initial` to `t_final` and checks the identity.
pub fn energy_identity_run(
    initial: &WaveState,
    field: MultiplierField,
    t_final: f64,
    nonlinear: bool,
    stride: usize,
) -> Result<IdentityReport> {
    let total = steps_for(t_final - initial.t, initial.grid().dt);
    let mut obs = IdentityObserver::new(field, nonlinear, stride, total)?;
    run(initial, t_final, nonlinear, &mut obs)?;
    obs.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_profile, GridSpec, ProfileSpec};
    use crate::solver::{make_exponents, make_initial, InitialSpec};
    use std::sync::Arc;

    fn setup(h: f64, p: f64, amp: f64, width: f64, half: f64, horizon: f64) -> WaveState {
        let disk = build_profile(&ProfileSpec::disk(1.0)).unwrap();
        let domain: Arc<Domain> = Domain::new(GridSpec::new(h, half, 0.5).unwrap(), Some(disk)).unwrap();
        let spec = InitialSpec::Gaussian { center: [3.0, 0.0], width, amplitude: amp };
        make_initial(&spec, &domain, make_exponents(p).unwrap(), horizon).unwrap()
    }

    #[test]
    fn zero_state() {
        let s = setup(0.2, 3.0, 0.0, 0.7, 10.0, 2.0);
        let r = energy_identity_run(&s, MultiplierField::Spherical { r_shift: 8.0 }, 1.0, true, 1).unwrap();
        assert_eq!(r.residual, 0.0);
        assert!(matches!(
            energy_identity_run(&s, MultiplierField::X1tilde, 1.0, true, 1),
            Err(Error::UnsupportedField(_))
        ));
    }

    #[test]
    fn normal_derivative_of_linear_profile() {
        let disk = build_profile(&ProfileSpec::disk(1.0)).unwrap();
        let d = &Domain::new(GridSpec::new(0.05, 3.0, 0.5).unwrap(), Some(disk)).unwrap();
        let g = &d.grid;
        let f: Vec<f64> = (0..g.len())
            .map(|k| {
                let (x, y) = (g.coord(k % g.n), g.coord(k / g.n));
                let r = x.hypot(y);
                if r > 1.0 { 2.0 * (r - 1.0) - (r - 1.0).powi(2) } else { 0.0 }
            })
            .collect();
        for b in d.profile.as_ref().unwrap().boundary_quadrature(16) {
            assert!((normal_derivative(d, &f, &b) - 2.0).abs() < 0.05);
        }
    }

    #[test]
    fn linear_energy_balance() {
        let s = setup(0.05, 3.0, 1.0, 1.0, 13.5, 4.0);
        let r = energy_identity_run(&s, MultiplierField::Dt, 4.0, false, 1).unwrap();
        assert!(r.residual < 1e-3, "{r:?}");
        assert_eq!(r.bulk, 0.0);
        assert_eq!(r.flux, 0.0);
    }

    #[test]
    fn conformal_and_spherical_balance() {
        let s = setup(0.1, 3.0, 1.5, 0.7, 12.0, 4.0);
        let x0 = energy_identity_run(&s, MultiplierField::X0, 4.0, true, 1).unwrap();
        assert!(x0.residual < 0.05, "{x0:?}");
        let sph = energy_identity_run(&s, MultiplierField::Spherical { r_shift: 8.0 }, 4.0, true, 2).unwrap();
        assert!(sph.residual < 0.05, "{sph:?}");
        assert!(sph.bulk > 0.0 && sph.flux > 0.0);
    }
}
