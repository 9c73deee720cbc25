use serde::{Deserialize, Serialize};

use super::fields::{current, energy_momentum};
use super::probe::{FieldSlice, MultiplierField};
use crate::error::{Error, Result};
use crate::functionals::gradient;
use crate::geometry::Domain;
use crate::solver::{Trajectory, WaveState};

/// Nodes kept by [`divergence_check`]: at least `margin` cells from the
/// obstacle, the frame and the edge of the field's domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivRegion {
    pub margin: f64,
}

impl Default for DivRegion {
    fn default() -> Self {
        Self { margin: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub field: MultiplierField,
    pub times: Vec<f64>,
    pub nodes: usize,
    pub max_abs_residual: f64,
    /// `∫|FD − closed form|` over the region, summed over times.
    pub l1_residual: f64,
    pub l1_closed: f64,
    pub l1_fd: f64,
    /// `l1_residual / l1_closed`; `None` when the closed form vanishes
    /// identically but the residual does not.
    pub relative_l1: Option<f64>,
}

fn find(traj: &Trajectory, t: f64, tol: f64) -> Option<usize> {
    traj.snapshots.iter().position(|s| (s.t - t).abs() <= tol)
}

fn node_derivs(state: &WaveState) -> (Vec<f64>, Vec<f64>) {
    let g = gradient(&state.domain, &state.phi);
    (g.dx, g.dy)
}

fn j0_at(slice: &FieldSlice, state: &WaveState, grad: &(Vec<f64>, Vec<f64>), k: usize, x: f64, y: f64) -> f64 {
    let l = slice.local(x, y).expect("region checked");
    let dphi = [state.phit[k], grad.0[k], grad.1[k]];
    let t = energy_momentum(dphi, state.phi[k], state.exponents.p);
    current(&t, l.x, l.chi, l.dchi, state.phi[k], dphi)[0]
}

fn in_region(domain: &Domain, slices: [&FieldSlice; 3], margin: f64, i: usize, j: usize) -> bool {
    let g = &domain.grid;
    let m = margin.ceil() as usize;
    if i < m || j < m || i + m >= g.n || j + m >= g.n || !domain.mask.is_exterior(g.index(i, j)) {
        return false;
    }
    let (x, y) = (g.coord(i), g.coord(j));
    let d = margin * g.h;
    if let Some(p) = &domain.profile {
        if p.radial_gap(x, y) < d {
            return false;
        }
    }
    let probes = [(x, y), (x + d, y), (x - d, y), (x, y + d), (x, y - d)];
    slices
        .iter()
        .all(|s| probes.iter().all(|&(a, b)| s.local(a, b).is_some()))
}

/// Finite-difference `∂^μJ_μ = -∂tJ₀ + ∂₁J₁ + ∂₂J₂` on a computed solution
/// compared with the closed form, at each of `times`.
///
/// Each time needs its own snapshot and one on either side, at most `2dt` away.
pub fn divergence_check(
    traj: &Trajectory,
    field: MultiplierField,
    region: &DivRegion,
    times: &[f64],
) -> Result<DivergenceReport> {
    let mut report = DivergenceReport {
        field,
        times: times.to_vec(),
        nodes: 0,
        max_abs_residual: 0.0,
        l1_residual: 0.0,
        l1_closed: 0.0,
        l1_fd: 0.0,
        relative_l1: None,
    };
    for &tc in times {
        let first = traj.snapshots.first().ok_or(Error::MissingSnapshot(tc))?;
        let dt = first.grid().dt;
        let i = find(traj, tc, 1e-6 * dt).ok_or(Error::MissingSnapshot(tc))?;
        if i == 0 || i + 1 >= traj.snapshots.len() {
            return Err(Error::MissingSnapshot(tc));
        }
        let (lo, mid, hi) = (&traj.snapshots[i - 1], &traj.snapshots[i], &traj.snapshots[i + 1]);
        let spacing = (mid.t - lo.t).max(hi.t - mid.t);
        if spacing > 2.0 * dt * (1.0 + 1e-9) {
            return Err(Error::SnapshotSpacingTooCoarse { spacing, dt });
        }
        let domain = &mid.domain;
        let g = &domain.grid;
        let p = mid.exponents.p;
        let r_max = g.half_width * std::f64::consts::SQRT_2 + g.h;
        let s_lo = FieldSlice::new(field, lo.t, p, r_max, g.h);
        let s_mid = FieldSlice::new(field, mid.t, p, r_max, g.h);
        let s_hi = FieldSlice::new(field, hi.t, p, r_max, g.h);

        let grad_lo = node_derivs(lo);
        let grad_mid = node_derivs(mid);
        let grad_hi = node_derivs(hi);

        let mut j1 = vec![0.0; g.len()];
        let mut j2 = vec![0.0; g.len()];
        for j in 0..g.n {
            for i in 0..g.n {
                let k = g.index(i, j);
                if !domain.mask.is_exterior(k) {
                    continue;
                }
                let (x, y) = (g.coord(i), g.coord(j));
                if let Some(l) = s_mid.local(x, y) {
                    let dphi = [mid.phit[k], grad_mid.0[k], grad_mid.1[k]];
                    let t = energy_momentum(dphi, mid.phi[k], p);
                    let c = current(&t, l.x, l.chi, l.dchi, mid.phi[k], dphi);
                    j1[k] = c[1];
                    j2[k] = c[2];
                }
            }
        }
        let dj1 = gradient(domain, &j1).dx;
        let dj2 = gradient(domain, &j2).dy;
        let area = g.cell_area();
        for j in 0..g.n {
            for i in 0..g.n {
                if !in_region(domain, [&s_lo, &s_mid, &s_hi], region.margin, i, j) {
                    continue;
                }
                let k = g.index(i, j);
                let (x, y) = (g.coord(i), g.coord(j));
                let dt0 = (j0_at(&s_hi, hi, &grad_hi, k, x, y) - j0_at(&s_lo, lo, &grad_lo, k, x, y))
                    / (hi.t - lo.t);
                let fd = -dt0 + dj1[k] + dj2[k];
                let dphi = [mid.phit[k], grad_mid.0[k], grad_mid.1[k]];
                let cf = s_mid
                    .closed_div(x, y, mid.phi[k], dphi)
                    .expect("region checked");
                let res = (fd - cf).abs();
                report.nodes += 1;
                report.max_abs_residual = report.max_abs_residual.max(res);
                report.l1_residual += res * area;
                report.l1_closed += cf.abs() * area;
                report.l1_fd += fd.abs() * area;
            }
        }
    }
    report.relative_l1 = if report.l1_closed > 0.0 {
        Some(report.l1_residual / report.l1_closed)
    } else if report.l1_residual == 0.0 {
        Some(0.0)
    } else {
        None
    };
    Ok(report)
}
