use std::sync::Arc;

use rayon::prelude::*;

use super::exponents::Exponents;
use super::state::WaveState;
use crate::error::{Error, Result};
use crate::geometry::Domain;

/// 5-point Laplacian of `field` on active nodes, zero elsewhere.
pub fn laplacian(domain: &Domain, field: &[f64], out: &mut [f64]) {
    forcing(domain, None, field, out)
}

/// `Δ_h φ - N(φ)` on active nodes (linear when `exponents` is `None`).
pub fn forcing(domain: &Domain, exponents: Option<&Exponents>, field: &[f64], out: &mut [f64]) {
    let g = &domain.grid;
    let n = g.n;
    let inv_h2 = 1.0 / (g.h * g.h);
    out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        row.fill(0.0);
        for &(i0, i1) in domain.mask.row_runs(j) {
            for i in i0..i1 {
                let k = j * n + i;
                let c = field[k];
                let lap = (field[k - 1] + field[k + 1] + field[k - n] + field[k + n] - 4.0 * c)
                    * inv_h2;
                row[i] = match exponents {
                    Some(e) => lap - e.nonlinearity(c),
                    None => lap,
                };
            }
        }
    });
}

/// Explicit leapfrog integrator holding two time levels.
///
/// Obstacle and frame nodes are never written, so they stay at the zero
/// value they were initialised with.
#[derive(Debug, Clone)]
pub struct Leapfrog {
    domain: Arc<Domain>,
    exponents: Exponents,
    nonlinear: bool,
    prev: Vec<f64>,
    cur: Vec<f64>,
    t0: f64,
    /// Signed step count from `t0`.
    steps: i64,
    direction: f64,
    dirichlet_violations: usize,
}

impl Leapfrog {
    /// Starts from Cauchy data. When the state carries a history it is reused
    /// as the previous level; otherwise a Taylor start is used:
    /// `φ^{-1} = φ0 - dt φ1 + dt²/2 F(φ0)`.
    pub fn new(state: &WaveState, nonlinear: bool) -> Result<Self> {
        let g = &state.domain.grid;
        if g.lambda > crate::geometry::CFL_LIMIT {
            return Err(Error::CflViolation { lambda: g.lambda });
        }
        state.validate()?;
        let dt = g.dt;
        let prev = match &state.history {
            Some(h) => h.clone(),
            None => {
                let mut f = vec![0.0; g.len()];
                let e = nonlinear.then_some(&state.exponents);
                forcing(&state.domain, e, &state.phi, &mut f);
                state
                    .phi
                    .iter()
                    .zip(&state.phit)
                    .zip(&f)
                    .map(|((u, v), a)| u - dt * v + 0.5 * dt * dt * a)
                    .collect()
            }
        };
        Ok(Self {
            domain: Arc::clone(&state.domain),
            exponents: state.exponents,
            nonlinear,
            prev,
            cur: state.phi.clone(),
            t0: state.t,
            steps: 0,
            direction: 1.0,
            dirichlet_violations: 0,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn exponents(&self) -> &Exponents {
        &self.exponents
    }

    pub fn dt(&self) -> f64 {
        self.domain.grid.dt
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.steps as f64 * self.dt()
    }

    /// Current `φ`.
    pub fn phi(&self) -> &[f64] {
        &self.cur
    }

    /// `φ` one step behind in the current direction of time.
    pub fn phi_prev(&self) -> &[f64] {
        &self.prev
    }

    pub fn dirichlet_violations(&self) -> usize {
        self.dirichlet_violations
    }

    /// Advances one step in the current direction.
    pub fn step(&mut self) -> Result<()> {
        let g = &self.domain.grid;
        let n = g.n;
        let dt2 = g.dt * g.dt;
        let inv_h2 = 1.0 / (g.h * g.h);
        let e = self.nonlinear.then_some(&self.exponents);
        let cur = &self.cur;
        let domain = &self.domain;
        // next overwrites prev in place
        let finite = self
            .prev
            .par_chunks_mut(n)
            .enumerate()
            .map(|(j, row)| {
                let mut ok = true;
                for &(i0, i1) in domain.mask.row_runs(j) {
                    for i in i0..i1 {
                        let k = j * n + i;
                        let c = cur[k];
                        let mut a = (cur[k - 1] + cur[k + 1] + cur[k - n] + cur[k + n]
                            - 4.0 * c)
                            * inv_h2;
                        if let Some(e) = e {
                            a -= e.nonlinearity(c);
                        }
                        let v = 2.0 * c - row[i] + dt2 * a;
                        ok &= v.is_finite();
                        row[i] = v;
                    }
                }
                ok
            })
            .reduce(|| true, |a, b| a && b);
        std::mem::swap(&mut self.prev, &mut self.cur);
        self.steps += self.direction as i64;
        if !finite {
            return Err(Error::NonFinite { t: self.time() });
        }
        self.dirichlet_violations += domain
            .mask
            .obstacle_nodes()
            .iter()
            .filter(|&&k| self.cur[k] != 0.0)
            .count();
        Ok(())
    }

    pub fn advance(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Flips the direction of time keeping the current level, so that
    /// subsequent steps retrace the trajectory backwards.
    pub fn reverse(&mut self) {
        let g = &self.domain.grid;
        let mut f = vec![0.0; g.len()];
        forcing(&self.domain, self.nonlinear.then_some(&self.exponents), &self.cur, &mut f);
        let dt2 = g.dt * g.dt;
        for ((p, c), a) in self.prev.iter_mut().zip(&self.cur).zip(&f) {
            *p = 2.0 * c - *p + dt2 * a;
        }
        self.direction = -self.direction;
    }

    /// Acceleration `F(φ)` at the current level.
    pub fn acceleration(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.cur.len()];
        forcing(
            &self.domain,
            self.nonlinear.then_some(&self.exponents),
            &self.cur,
            &mut f,
        );
        f
    }

    /// Current state. `∂tφ = (φ^{n+1} - φ^{n-1}) / 2dt`, evaluated without
    /// taking the step as `(φ^n - φ^{n-1})/dt + dt/2 F(φ^n)`.
    pub fn state(&self) -> WaveState {
        let dt = self.dt() * self.direction;
        let f = self.acceleration();
        let phit = self
            .cur
            .iter()
            .zip(&self.prev)
            .zip(&f)
            .map(|((c, p), a)| (c - p) / dt + 0.5 * dt * a)
            .collect();
        let history = (self.direction > 0.0).then(|| self.prev.clone());
        WaveState {
            t: self.time(),
            phi: self.cur.clone(),
            phit,
            exponents: self.exponents,
            domain: Arc::clone(&self.domain),
            history,
        }
    }

    /// State one step back: `∂tφ^{n-1} = (φ^n - φ^{n-1})/dt - dt/2 F(φ^{n-1})`.
    pub fn previous_state(&self) -> WaveState {
        let dt = self.dt() * self.direction;
        let mut f = vec![0.0; self.prev.len()];
        forcing(
            &self.domain,
            self.nonlinear.then_some(&self.exponents),
            &self.prev,
            &mut f,
        );
        let phit = self
            .cur
            .iter()
            .zip(&self.prev)
            .zip(&f)
            .map(|((c, p), a)| (c - p) / dt - 0.5 * dt * a)
            .collect();
        WaveState {
            t: self.time() - dt,
            phi: self.prev.clone(),
            phit,
            exponents: self.exponents,
            domain: Arc::clone(&self.domain),
            history: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_profile, GridSpec, ProfileSpec};
    use crate::solver::{make_exponents, make_initial, InitialSpec};

    fn free_domain(h: f64, half: f64) -> Arc<Domain> {
        Domain::new(GridSpec::new(h, half, 0.5).unwrap(), None).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let d = free_domain(0.1, 3.0);
        let s = WaveState::zero(&d, make_exponents(3.0).unwrap(), 0.0);
        let mut lf = Leapfrog::new(&s, true).unwrap();
        lf.advance(20).unwrap();
        assert!(lf.phi().iter().all(|v| *v == 0.0));
        assert!((lf.time() - 20.0 * 0.05).abs() < 1e-14);
    }

    #[test]
    fn matches_dalembert_for_plane_data() {
        // φ0 = f(x1), φ1 = 0 → φ = (f(x-t)+f(x+t))/2 while the frame is unreached
        let f = |x: f64| (-(x * x) / 0.5).exp();
        let err_at = |h: f64| {
            let d = free_domain(h, 8.0);
            let g = d.grid;
            let e = make_exponents(3.0).unwrap();
            let mut s = WaveState::zero(&d, e, 0.0);
            for j in 1..g.n - 1 {
                for i in 1..g.n - 1 {
                    s.phi[g.index(i, j)] = f(g.coord(i));
                }
            }
            let mut lf = Leapfrog::new(&s, false).unwrap();
            let steps = (1.0 / g.dt).round() as usize;
            lf.advance(steps).unwrap();
            let t = lf.time();
            let j = g.nearest(0.0);
            let mut err: f64 = 0.0;
            for i in 0..g.n {
                let x = g.coord(i);
                if x.abs() < 4.0 {
                    let exact = 0.5 * (f(x - t) + f(x + t));
                    err = err.max((lf.phi()[g.index(i, j)] - exact).abs());
                }
            }
            err
        };
        let (e1, e2) = (err_at(0.1), err_at(0.05));
        assert!(e1 < 5e-3, "{e1}");
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn time_reversal_returns_data() {
        let disk = build_profile(&ProfileSpec::disk(1.0)).unwrap();
        let d = Domain::new(GridSpec::new(0.1, 9.0, 0.5).unwrap(), Some(disk)).unwrap();
        let e = make_exponents(3.0).unwrap();
        let spec = InitialSpec::Gaussian {
            center: [2.5, 0.0],
            width: 0.7,
            amplitude: 1.0,
        };
        let s0 = make_initial(&spec, &d, e, 2.0).unwrap();
        let mut lf = Leapfrog::new(&s0, true).unwrap();
        lf.advance(40).unwrap();
        lf.reverse();
        lf.advance(40).unwrap();
        assert!(lf.time().abs() < 1e-13);
        let err = lf
            .phi()
            .iter()
            .zip(&s0.phi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-11, "{err}");
        assert_eq!(lf.dirichlet_violations(), 0);
    }

    #[test]
    fn finite_propagation() {
        let d = free_domain(0.1, 10.0);
        let e = make_exponents(3.0).unwrap();
        let spec = InitialSpec::Gaussian {
            center: [0.0, 0.0],
            width: 0.5,
            amplitude: 1.0,
        };
        let a = spec.support_radius();
        let s0 = make_initial(&spec, &d, e, 2.0).unwrap();
        let mut lf = Leapfrog::new(&s0, true).unwrap();
        lf.advance(40).unwrap();
        let s = lf.state();
        let g = d.grid;
        for j in 0..g.n {
            for i in 0..g.n {
                if g.coord(i).hypot(g.coord(j)) > a + s.t + 2.0 * g.h {
                    assert!(s.phi[g.index(i, j)].abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn state_velocity_is_centered_difference() {
        let d = free_domain(0.1, 5.0);
        let e = make_exponents(3.0).unwrap();
        let spec = InitialSpec::Gaussian {
            center: [0.5, 0.0],
            width: 0.5,
            amplitude: 1.0,
        };
        let s0 = make_initial(&spec, &d, e, 1.0).unwrap();
        let mut lf = Leapfrog::new(&s0, true).unwrap();
        lf.advance(5).unwrap();
        let before = lf.phi_prev().to_vec();
        let s = lf.state();
        lf.step().unwrap();
        let dt = d.grid.dt;
        for k in (0..s.phi.len()).step_by(37) {
            let c = (lf.phi()[k] - before[k]) / (2.0 * dt);
            assert!((c - s.phit[k]).abs() < 1e-12 * (1.0 + c.abs()));
        }
        // exact at the start
        let s00 = Leapfrog::new(&s0, true).unwrap().state();
        let err = s00
            .phit
            .iter()
            .zip(&s0.phit)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn non_finite_guard() {
        let d = free_domain(0.1, 2.0);
        let e = make_exponents(3.0).unwrap();
        let mut s = WaveState::zero(&d, e, 0.0);
        let g = d.grid;
        s.phi[g.index(g.n / 2, g.n / 2)] = 1e120;
        let mut lf = Leapfrog::new(&s, true).unwrap();
        assert!(matches!(lf.advance(10), Err(Error::NonFinite { .. })));
    }
}
