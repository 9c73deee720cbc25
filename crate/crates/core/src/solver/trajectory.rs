use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::exponents::make_exponents;
use super::initial::InitialSpec;
use super::leapfrog::Leapfrog;
use super::state::WaveState;
use crate::error::{Error, Result};
use crate::geometry::{Domain, GridSpec, ProfileSpec};

/// Hook called after every step (and once at the start) of [`run`].
pub trait Observer {
    fn observe(&mut self, lf: &Leapfrog) -> Result<()>;
}

impl<F: FnMut(&Leapfrog) -> Result<()>> Observer for F {
    fn observe(&mut self, lf: &Leapfrog) -> Result<()> {
        self(lf)
    }
}

/// Number of steps needed to reach `span` (a tiny overshoot tolerance keeps
/// `span = k·dt` at exactly `k` steps).
pub fn steps_for(span: f64, dt: f64) -> usize {
    ((span / dt) - 1e-9).ceil().max(0.0) as usize
}

/// Steps from `initial` until `t_final`, calling `observer` at every level.
/// Returns the integrator positioned at the last level.
pub fn run(
    initial: &WaveState,
    t_final: f64,
    nonlinear: bool,
    observer: &mut dyn Observer,
) -> Result<Leapfrog> {
    let mut lf = Leapfrog::new(initial, nonlinear)?;
    let steps = steps_for(t_final - initial.t, lf.dt());
    observer.observe(&lf)?;
    for _ in 0..steps {
        lf.step()?;
        observer.observe(&lf)?;
    }
    Ok(lf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub p: f64,
    pub grid: GridSpec,
    pub profile: Option<ProfileSpec>,
    pub initial: Option<InitialSpec>,
    pub nonlinear: bool,
    pub steps: usize,
    pub dirichlet_violations: usize,
}

/// Snapshots at requested times plus run metadata.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<WaveState>,
    pub meta: RunMeta,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Snapshot whose time is within `tol` of `t`.
    pub fn at(&self, t: f64, tol: f64) -> Option<&WaveState> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= tol)
    }

    pub fn last(&self) -> &WaveState {
        self.snapshots.last().expect("trajectory has snapshots")
    }
}

fn validate_times(t0: f64, t_final: f64, times: &[f64]) -> Result<()> {
    let mut last = f64::NEG_INFINITY;
    for &t in times {
        if !(t > last) || t < t0 - 1e-12 || t > t_final + 1e-12 {
            return Err(Error::ConfigInvalid(format!(
                "snapshot times must increase within [{t0}, {t_final}], got {t}"
            )));
        }
        last = t;
    }
    Ok(())
}

/// Collects snapshots at requested times, linearly interpolating between
/// the two bracketing levels when a time falls between steps.
struct SnapshotCollector<'a> {
    times: &'a [f64],
    next: usize,
    out: Vec<WaveState>,
    start: &'a WaveState,
}

impl Observer for SnapshotCollector<'_> {
    fn observe(&mut self, lf: &Leapfrog) -> Result<()> {
        let t = lf.time();
        let tol = 1e-9 * lf.dt();
        if self.next >= self.times.len() || self.times[self.next] > t + tol {
            return Ok(());
        }
        let s = if t == self.start.t {
            self.start.clone()
        } else {
            lf.state()
        };
        let mut prev: Option<WaveState> = None;
        while self.next < self.times.len() && self.times[self.next] <= t + tol {
            let want = self.times[self.next];
            if (want - t).abs() <= tol {
                self.out.push(s.clone());
            } else {
                let p = prev.get_or_insert_with(|| lf.previous_state());
                let w = (want - p.t) / (t - p.t);
                let mut m = WaveState::lerp(p, &s, w);
                m.t = want;
                self.out.push(m);
            }
            self.next += 1;
        }
        Ok(())
    }
}

fn evolve_inner(
    initial: &WaveState,
    t_final: f64,
    snapshot_times: &[f64],
    nonlinear: bool,
    initial_spec: Option<InitialSpec>,
) -> Result<Trajectory> {
    validate_times(initial.t, t_final, snapshot_times)?;
    let mut col = SnapshotCollector {
        times: snapshot_times,
        next: 0,
        out: Vec::with_capacity(snapshot_times.len()),
        start: initial,
    };
    let lf = run(initial, t_final, nonlinear, &mut col)?;
    let d = &initial.domain;
    Ok(Trajectory {
        snapshots: col.out,
        meta: RunMeta {
            p: initial.exponents.p,
            grid: d.grid,
            profile: d.profile.as_ref().map(|p| p.spec().clone()),
            initial: initial_spec,
            nonlinear,
            steps: steps_for(t_final - initial.t, lf.dt()),
            dirichlet_violations: lf.dirichlet_violations(),
        },
    })
}

/// Repeated leapfrog steps from `initial` up to `t_final`.
pub fn evolve(
    initial: &WaveState,
    t_final: f64,
    snapshot_times: &[f64],
    nonlinear: bool,
) -> Result<Trajectory> {
    evolve_inner(initial, t_final, snapshot_times, nonlinear, None)
}

/// Like [`evolve`] but records the data family in the metadata.
pub fn evolve_from_spec(
    initial: &WaveState,
    spec: &InitialSpec,
    t_final: f64,
    snapshot_times: &[f64],
    nonlinear: bool,
) -> Result<Trajectory> {
    evolve_inner(initial, t_final, snapshot_times, nonlinear, Some(spec.clone()))
}

/// Linear flow `L(t)` applied to `state`, sampled at absolute times in
/// `[state.t, state.t + span]`.
pub fn linear_propagate(state: &WaveState, span: f64, snapshot_times: &[f64]) -> Result<Trajectory> {
    evolve_inner(state, state.t + span, snapshot_times, false, None)
}

/// Writes `t,h,L,p` followed by one `phi,phit` record per node in row-major
/// order, plus a JSON sidecar `<path>.json` with the metadata.
pub fn write_snapshot_csv(path: &Path, state: &WaveState, meta: Option<&RunMeta>) -> Result<()> {
    let g = state.grid();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,h,L,p")?;
    writeln!(w, "{},{},{},{}", state.t, g.h, g.half_width, state.exponents.p)?;
    writeln!(w, "phi,phit")?;
    for (a, b) in state.phi.iter().zip(&state.phit) {
        writeln!(w, "{a:e},{b:e}")?;
    }
    w.flush()?;
    if let Some(meta) = meta {
        let side = path.with_extension("json");
        serde_json::to_writer_pretty(File::create(side)?, meta)?;
    }
    Ok(())
}

/// Reads a file written by [`write_snapshot_csv`] onto `domain`.
pub fn read_snapshot_csv(path: &Path, domain: &Arc<Domain>) -> Result<WaveState> {
    let bad = |m: &str| Error::ConfigInvalid(format!("{}: {m}", path.display()));
    let mut lines = BufReader::new(File::open(path)?).lines();
    let mut next = || -> Result<String> { lines.next().ok_or_else(|| bad("truncated"))?.map_err(Error::from) };
    next()?;
    let head: Vec<f64> = next()?
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad("bad header")))
        .collect::<Result<_>>()?;
    if head.len() != 4 {
        return Err(bad("bad header"));
    }
    let g = &domain.grid;
    if (head[1] - g.h).abs() > 1e-12 * g.h || (head[2] - g.half_width).abs() > 1e-9 {
        return Err(bad("grid mismatch"));
    }
    next()?;
    let mut phi = Vec::with_capacity(g.len());
    let mut phit = Vec::with_capacity(g.len());
    for _ in 0..g.len() {
        let line = next()?;
        let (a, b) = line.split_once(',').ok_or_else(|| bad("bad record"))?;
        phi.push(a.trim().parse().map_err(|_| bad("bad value"))?);
        phit.push(b.trim().parse().map_err(|_| bad("bad value"))?);
    }
    Ok(WaveState {
        t: head[0],
        phi,
        phit,
        exponents: make_exponents(head[3])?,
        domain: Arc::clone(domain),
        history: None,
    })
}
