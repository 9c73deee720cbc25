use std::sync::Arc;

use super::exponents::Exponents;
use crate::error::{Error, Result};
use crate::geometry::{Domain, GridSpec, Mask};

/// One time slice `(t, φ, ∂tφ)` on the masked grid.
#[derive(Debug, Clone)]
pub struct WaveState {
    pub t: f64,
    pub phi: Vec<f64>,
    pub phit: Vec<f64>,
    pub exponents: Exponents,
    pub domain: Arc<Domain>,
    /// `φ` at `t - dt` when the state came out of the integrator. Lets a
    /// restarted run continue the same discrete trajectory.
    pub history: Option<Vec<f64>>,
}

impl WaveState {
    pub fn zero(domain: &Arc<Domain>, exponents: Exponents, t: f64) -> Self {
        let n = domain.grid.len();
        Self {
            t,
            phi: vec![0.0; n],
            phit: vec![0.0; n],
            exponents,
            domain: Arc::clone(domain),
            history: None,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.domain.grid
    }

    pub fn mask(&self) -> &Mask {
        &self.domain.mask
    }

    /// Same state without the integrator history.
    pub fn without_history(mut self) -> Self {
        self.history = None;
        self
    }

    /// Checks the Dirichlet and finiteness invariants.
    pub fn validate(&self) -> Result<()> {
        if self.phi.iter().chain(&self.phit).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: self.t });
        }
        let bad = self
            .mask()
            .obstacle_nodes()
            .iter()
            .any(|&k| self.phi[k] != 0.0 || self.phit[k] != 0.0);
        if bad {
            return Err(Error::DomainViolation(format!(
                "nonzero obstacle value at t = {}",
                self.t
            )));
        }
        Ok(())
    }

    /// `Σ|φ|²h²` over the grid.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.phi.iter().map(|v| v * v).sum();
        (s * self.grid().cell_area()).sqrt()
    }

    /// Largest `|x|` at which `|φ| > tol`.
    pub fn support_radius(&self, tol: f64) -> f64 {
        let g = self.grid();
        let mut r: f64 = 0.0;
        for j in 0..g.n {
            for i in 0..g.n {
                if self.phi[g.index(i, j)].abs() > tol {
                    r = r.max(g.coord(i).hypot(g.coord(j)));
                }
            }
        }
        r
    }

    /// Linear combination `(1-w)·a + w·b` of two states on the same domain.
    pub fn lerp(a: &WaveState, b: &WaveState, w: f64) -> WaveState {
        let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter()
                .zip(y)
                .map(|(u, v)| (1.0 - w) * u + w * v)
                .collect()
        };
        WaveState {
            t: (1.0 - w) * a.t + w * b.t,
            phi: mix(&a.phi, &b.phi),
            phit: mix(&a.phit, &b.phit),
            exponents: a.exponents,
            domain: Arc::clone(&a.domain),
            history: None,
        }
    }
}
