use serde::{Deserialize, Serialize};

use super::diff::{edge_energy, node_sum};
use crate::error::{Error, Result};
use crate::solver::{linear_propagate, Trajectory, WaveState};
use crate::spectral::{assemble, DirichletOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "s", rename_all = "snake_case")]
pub enum ResidualNorm {
    /// `Ḣ¹ × L²`
    Energy,
    /// `Ḣ^s × Ḣ^{s-1}` through the spectral calculus.
    Fractional(f64),
}

/// Distance between two states on the same domain in the chosen norm.
pub fn residual_between(
    a: &WaveState,
    b: &WaveState,
    norm: ResidualNorm,
    op: Option<&DirichletOperator>,
) -> Result<f64> {
    let d: Vec<f64> = a.phi.iter().zip(&b.phi).map(|(x, y)| x - y).collect();
    let dt: Vec<f64> = a.phit.iter().zip(&b.phit).map(|(x, y)| x - y).collect();
    match norm {
        ResidualNorm::Energy => {
            let grad = edge_energy(&a.domain, &d, None);
            let kin = node_sum(&a.domain, |k, _, _| dt[k] * dt[k]);
            Ok((grad + kin).sqrt())
        }
        ResidualNorm::Fractional(s) => match op {
            Some(op) => op.pair_norm(&d, &dt, s),
            None => assemble(&a.domain)?.pair_norm(&d, &dt, s),
        },
    }
}

/// `‖Φ(T2) - L(T2-T1)Φ(T1)‖` for snapshots of `traj` at `t1` and `t2`.
pub fn scattering_residual(
    traj: &Trajectory,
    t1: f64,
    t2: f64,
    norm: ResidualNorm,
) -> Result<f64> {
    if t1 > t2 {
        return Err(Error::ConfigInvalid(format!("T1 = {t1} > T2 = {t2}")));
    }
    let tol = 1e-6 * traj.meta.grid.dt;
    let s1 = traj.at(t1, tol).ok_or(Error::MissingSnapshot(t1))?;
    let s2 = traj.at(t2, tol).ok_or(Error::MissingSnapshot(t2))?;
    if t1 == t2 {
        return Ok(0.0);
    }
    let lin = linear_propagate(s1, s2.t - s1.t, &[s2.t])?;
    residual_between(s2, &lin.snapshots[0], norm, None)
}

/// [`scattering_residual`] for several `t1` against one `t2`, assembling the
/// spectral operator at most once.
pub fn scattering_residuals(
    traj: &Trajectory,
    t1s: &[f64],
    t2: f64,
    norm: ResidualNorm,
) -> Result<Vec<f64>> {
    let tol = 1e-6 * traj.meta.grid.dt;
    let s2 = traj.at(t2, tol).ok_or(Error::MissingSnapshot(t2))?;
    let op = match norm {
        ResidualNorm::Fractional(_) => Some(assemble(&s2.domain)?),
        ResidualNorm::Energy => None,
    };
    t1s.iter()
        .map(|&t1| {
            if t1 > t2 {
                return Err(Error::ConfigInvalid(format!("T1 = {t1} > T2 = {t2}")));
            }
            let s1 = traj.at(t1, tol).ok_or(Error::MissingSnapshot(t1))?;
            if t1 == t2 {
                return Ok(0.0);
            }
            let lin = linear_propagate(s1, s2.t - s1.t, &[s2.t])?;
            residual_between(s2, &lin.snapshots[0], norm, op.as_ref())
        })
        .collect()
}
