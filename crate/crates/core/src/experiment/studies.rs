use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, Schedule};
use crate::error::{Error, Result};
use crate::functionals::{
    conformal_energy, default_window, leapfrog_energy, linear_fit, scattering_residuals, sup_by_region,
    weighted_potential, DecayFit, EnergySeries, ResidualNorm,
};
use crate::geometry::{build_profile, Domain, GridSpec};
use crate::multiplier::{
    divergence_check, energy_identity_run, flux_sweep, spherical_x, DivRegion, DivergenceReport, FluxRow,
    IdentityReport, MultiplierField,
};
use crate::solver::{evolve, make_exponents, make_initial, run, Leapfrog, Observer, RunMeta, WaveState};
use crate::spectral::assemble;

/// Domain and initial state for a config, on the given grid.
pub fn prepare(config: &RunConfig, grid: GridSpec) -> Result<WaveState> {
    config.validate()?;
    let profile = config.obstacle.as_ref().map(build_profile).transpose()?;
    let domain = Domain::new(grid, profile)?;
    make_initial(&config.initial_spec(), &domain, make_exponents(config.p)?, config.t_final)
}

fn meta_for(config: &RunConfig, state: &WaveState, lf: &Leapfrog, steps: usize) -> RunMeta {
    RunMeta {
        p: config.p,
        grid: state.domain.grid,
        profile: config.obstacle.clone(),
        initial: Some(config.initial_spec()),
        nonlinear: config.nonlinear,
        steps,
        dirichlet_violations: lf.dirichlet_violations(),
    }
}

pub const SERIES_NAMES: [&str; 6] = [
    "energy",
    "weighted_potential",
    "sup_interior",
    "sup_cone",
    "sup_far",
    "conformal_energy",
];

/// Scalar diagnostics of one state, in the order of [`SERIES_NAMES`].
pub fn diagnostics(state: &WaveState, nonlinear: bool) -> Result<[f64; 6]> {
    let sup = sup_by_region(state);
    Ok([
        leapfrog_energy(state, nonlinear)?.total(),
        weighted_potential(state)?,
        sup[0],
        sup[1],
        sup[2],
        conformal_energy(state)?,
    ])
}

struct SeriesObserver {
    targets: Vec<f64>,
    next: usize,
    nonlinear: bool,
    series: Vec<EnergySeries>,
}

impl Observer for SeriesObserver {
    fn observe(&mut self, lf: &Leapfrog) -> Result<()> {
        let t = lf.time();
        let half = 0.5 * lf.dt();
        if self.next >= self.targets.len() || self.targets[self.next] > t + half {
            return Ok(());
        }
        while self.next < self.targets.len() && self.targets[self.next] <= t + half {
            self.next += 1;
        }
        let values = diagnostics(&lf.state(), self.nonlinear)?;
        for (s, v) in self.series.iter_mut().zip(values) {
            s.push(t, v);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRun {
    pub series: Vec<EnergySeries>,
    pub meta: RunMeta,
}

impl SeriesRun {
    pub fn get(&self, name: &str) -> Option<&EnergySeries> {
        self.series.iter().find(|s| s.name == name)
    }
}

/// `max_t |E(t) - E(0)| / |E(0)|`.
pub fn relative_drift(series: &EnergySeries) -> f64 {
    let Some(&(_, e0)) = series.points.first() else {
        return 0.0;
    };
    let worst = series
        .points
        .iter()
        .map(|(_, e)| (e - e0).abs())
        .fold(0.0, f64::max);
    if e0 == 0.0 {
        worst
    } else {
        worst / e0.abs()
    }
}

/// Runs the config and records [`diagnostics`] on its schedule, streaming.
pub fn simulate_series(config: &RunConfig, schedule: &Schedule) -> Result<SeriesRun> {
    let initial = prepare(config, config.grid.spec()?)?;
    let mut obs = SeriesObserver {
        targets: schedule.times(config.t_final)?,
        next: 0,
        nonlinear: config.nonlinear,
        series: SERIES_NAMES.iter().map(|n| EnergySeries::new(*n)).collect(),
    };
    let lf = run(&initial, config.t_final, config.nonlinear, &mut obs)?;
    let steps = crate::solver::steps_for(config.t_final, lf.dt());
    Ok(SeriesRun {
        series: obs.series,
        meta: meta_for(config, &initial, &lf, steps),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub t_final: f64,
    pub levels: Vec<f64>,
    pub reference_h: f64,
    /// Discrete `L²` distance to the reference at the final time.
    pub errors: Vec<f64>,
    /// `log(e_k/e_{k+1}) / log(h_k/h_{k+1})`.
    pub orders: Vec<f64>,
    pub dirichlet_violations: usize,
}

impl ConvergenceReport {
    pub fn observed_order(&self) -> Option<f64> {
        self.orders.last().copied()
    }
}

fn final_state(config: &RunConfig, h: f64) -> Result<(WaveState, usize)> {
    let grid = config.grid.with_h(h).spec()?;
    let initial = prepare(config, grid)?;
    let steps = config.t_final / grid.dt;
    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
        return Err(Error::ConfigInvalid(format!(
            "T_final = {} is not a whole number of steps at h = {h}",
            config.t_final
        )));
    }
    let mut noop = |_: &Leapfrog| Ok(());
    let lf = run(&initial, config.t_final, config.nonlinear, &mut noop)?;
    Ok((lf.state(), lf.dirichlet_violations()))
}

fn l2_distance(coarse: &WaveState, fine: &WaveState) -> Result<f64> {
    let gc = &coarse.domain.grid;
    let gf = &fine.domain.grid;
    let mut sum = 0.0;
    for j in 0..gc.n {
        let jf = gf.nearest(gc.coord(j));
        for i in 0..gc.n {
            let k = gc.index(i, j);
            if !coarse.domain.mask.is_exterior(k) {
                continue;
            }
            let i_f = gf.nearest(gc.coord(i));
            if (gf.coord(i_f) - gc.coord(i)).abs() > 1e-9 * gc.h || (gf.coord(jf) - gc.coord(j)).abs() > 1e-9 * gc.h {
                return Err(Error::ConfigInvalid("convergence grids are not nested".into()));
            }
            let d = coarse.phi[k] - fine.phi[gf.index(i_f, jf)];
            sum += d * d;
        }
    }
    Ok((sum * gc.cell_area()).sqrt())
}

/// Self-convergence against a fine reference run on nested grids.
pub fn convergence_study(config: &RunConfig) -> Result<ConvergenceReport> {
    let opts = &config.convergence;
    if opts.levels.len() < 2 || opts.levels.iter().any(|&h| h <= opts.reference_h) {
        return Err(Error::ConfigInvalid(
            "need at least two levels, all coarser than the reference".into(),
        ));
    }
    let (reference, mut violations) = final_state(config, opts.reference_h)?;
    let mut errors = Vec::new();
    for &h in &opts.levels {
        let (s, v) = final_state(config, h)?;
        violations += v;
        errors.push(l2_distance(&s, &reference)?);
    }
    let orders = errors
        .windows(2)
        .zip(opts.levels.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    Ok(ConvergenceReport {
        t_final: config.t_final,
        levels: opts.levels.clone(),
        reference_h: opts.reference_h,
        errors,
        orders,
        dirichlet_violations: violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub run: SeriesRun,
    pub window: (f64, f64),
    pub sup_interior: DecayFit,
    pub weighted_potential: DecayFit,
    /// `-(p₅-1)/4`, the interior rate of the pointwise bound.
    pub predicted_interior: f64,
}

/// Geometric schedule unless the config names one explicitly.
pub fn decay_schedule(config: &RunConfig) -> Schedule {
    if config.schedule == Schedule::default() {
        Schedule::Geometric { t0: 1.0, ratio: 1.05 }
    } else {
        config.schedule.clone()
    }
}

pub fn decay_study(config: &RunConfig) -> Result<DecayReport> {
    let run = simulate_series(config, &decay_schedule(config))?;
    let window = config.decay.window.unwrap_or_else(|| default_window(config.t_final));
    let sup_interior = run.get("sup_interior").expect("series present").fit(window)?;
    let weighted_potential = run.get("weighted_potential").expect("series present").fit(window)?;
    let p5 = config.p.min(5.0);
    Ok(DecayReport {
        run,
        window,
        sup_interior,
        weighted_potential,
        predicted_interior: -(p5 - 1.0) / 4.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterReport {
    pub norm: ResidualNorm,
    pub t1: Vec<f64>,
    pub t_final: f64,
    pub residuals: Vec<f64>,
    pub strictly_decreasing: bool,
    /// Least-squares slope of `log R` against `log T1`.
    pub slope: f64,
    pub r_squared: f64,
    /// `-(p₅² + 2p₅ - 19)/16`.
    pub predicted_tail: f64,
    pub above_energy_threshold: bool,
    pub dirichlet_violations: usize,
}

/// Residuals of the nonlinear flow against the linear flow started at each `T1`.
pub fn scatter_with(config: &RunConfig, t1: &[f64], norm: ResidualNorm) -> Result<ScatterReport> {
    let initial = prepare(config, config.grid.spec()?)?;
    let mut times: Vec<f64> = t1.to_vec();
    times.push(config.t_final);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let traj = evolve(&initial, config.t_final, &times, true)?;
    let residuals = scattering_residuals(&traj, t1, config.t_final, norm)?;
    let xs: Vec<f64> = t1.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let (slope, _, r_squared) = if residuals.iter().all(|&r| r > 0.0) && xs.len() >= 2 {
        linear_fit(&xs, &ys)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let p5 = config.p.min(5.0);
    Ok(ScatterReport {
        norm,
        t1: t1.to_vec(),
        t_final: config.t_final,
        strictly_decreasing: residuals.windows(2).all(|w| w[1] < w[0]),
        residuals,
        slope,
        r_squared,
        predicted_tail: -(p5 * p5 + 2.0 * p5 - 19.0) / 16.0,
        above_energy_threshold: initial.exponents.energy_scattering(),
        dirichlet_violations: traj.meta.dirichlet_violations,
    })
}

pub fn scatter_study(config: &RunConfig) -> Result<ScatterReport> {
    scatter_with(config, &config.scatter.t1, config.scatter.norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierReport {
    pub identity: IdentityReport,
    pub divergence: Option<DivergenceReport>,
}

/// Resolves an automatic spherical shift to the data support radius plus one.
pub fn resolve_field(config: &RunConfig, field: MultiplierField) -> MultiplierField {
    match field {
        MultiplierField::Spherical { r_shift } if r_shift <= 0.0 => MultiplierField::Spherical {
            r_shift: config.initial_spec().support_radius() + 1.0,
        },
        f => f,
    }
}

pub fn multiplier_study(config: &RunConfig) -> Result<MultiplierReport> {
    let opts = &config.multiplier;
    let initial = prepare(config, config.grid.spec()?)?;
    let field = resolve_field(config, opts.field);
    let identity = energy_identity_run(&initial, field, config.t_final, config.nonlinear, opts.stride)?;
    let divergence = if opts.divergence_times.is_empty() {
        None
    } else {
        let dt = initial.grid().dt;
        let mut times: Vec<f64> = opts
            .divergence_times
            .iter()
            .flat_map(|&t| [t - dt, t, t + dt])
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * dt);
        let end = times.last().copied().unwrap_or(0.0);
        let traj = evolve(&initial, end, &times, config.nonlinear)?;
        let field = resolve_field(config, opts.divergence_field);
        Some(divergence_check(&traj, field, &DivRegion::default(), &opts.divergence_times)?)
    };
    Ok(MultiplierReport { identity, divergence })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    #[serde(skip)]
    pub rows: Vec<FluxRow>,
    pub r_shift: f64,
    pub min_xr: f64,
    pub all_sign_ok: bool,
    pub angular_samples: usize,
    /// `max |X^θ| / |X^t|` over the random samples.
    pub max_angular_rel: f64,
}

pub fn flux_study(config: &RunConfig) -> Result<FluxReport> {
    let o = &config.flux;
    let r_shift = match (o.r_shift, &config.obstacle) {
        (Some(r), _) => r,
        (None, Some(spec)) => build_profile(spec)?.r_outer(),
        (None, None) => 1.0,
    };
    let rows = flux_sweep(o.t_max, o.n_t, o.n_r, &o.ps, r_shift, o.n_quad)?;
    let min_xr = rows.iter().map(|r| r.xr_value).fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut max_angular_rel: f64 = 0.0;
    for _ in 0..o.angular_samples {
        let t = rng.gen_range(0.0..o.t_max);
        let r = rng.gen_range(0.0..2.0 * (t + r_shift));
        let p = o.ps[rng.gen_range(0..o.ps.len().max(1))];
        let e = spherical_x(t, r, p, r_shift, o.n_quad)?;
        max_angular_rel = max_angular_rel.max(e.x_theta.abs() / e.xt.abs());
    }
    Ok(FluxReport {
        all_sign_ok: rows.iter().all(|r| r.sign_ok),
        rows,
        r_shift,
        min_xr,
        angular_samples: o.angular_samples,
        max_angular_rel,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralChecks {
    /// Free-box spectrum against `(4/h²)(sin²(iπ/2N) + sin²(jπ/2N))`.
    pub box_max_rel_error: f64,
    /// `‖A^{1/2}f‖²` against `h² fᵀAf`.
    pub quadratic_form_rel_error: f64,
    /// `A^{a}A^{b}f` against `A^{a+b}f`, max-norm relative.
    pub semigroup_rel_error: f64,
}

/// Exactness checks of the spectral calculus on a small free box.
pub fn spectral_checks(seed: u64) -> Result<SpectralChecks> {
    let (h, half) = (0.1, 2.0);
    let domain = Domain::new(GridSpec::new(h, half, 0.5)?, None)?;
    let op = assemble(&domain)?;
    let n = (2.0 * half / h).round() as usize;
    let mut expect = Vec::new();
    for i in 1..n {
        for j in 1..n {
            let s = |k: usize| (k as f64 * std::f64::consts::PI / (2.0 * n as f64)).sin().powi(2);
            expect.push(4.0 / (h * h) * (s(i) + s(j)));
        }
    }
    expect.sort_by(f64::total_cmp);
    let got = op.eigenvalues()?;
    let box_max_rel_error = got
        .iter()
        .zip(&expect)
        .map(|(g, e)| (g - e).abs() / e)
        .fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = op.extend(&x);
    let mut ax = vec![0.0; x.len()];
    op.matvec(&x, &mut ax);
    let form: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum::<f64>() * h * h;
    let n1 = op.frac_norm(&f, 1.0)?;
    let quadratic_form_rel_error = (n1 * n1 - form).abs() / form;

    let mut semigroup_rel_error: f64 = 0.0;
    for (a, b) in [(0.3, 0.5), (-0.6, 1.2), (0.25, -0.75)] {
        let lhs = op.frac_apply(&op.frac_apply(&f, a)?, b)?;
        let rhs = op.frac_apply(&f, a + b)?;
        let scale = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let err = lhs.iter().zip(&rhs).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        semigroup_rel_error = semigroup_rel_error.max(err / scale);
    }
    Ok(SpectralChecks {
        box_max_rel_error,
        quadratic_form_rel_error,
        semigroup_rel_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub checks: SpectralChecks,
    pub s: f64,
    pub scatter: ScatterReport,
}

pub fn spectrum_study(config: &RunConfig) -> Result<SpectrumReport> {
    let checks = spectral_checks(config.seed)?;
    let s = config
        .spectrum
        .s
        .unwrap_or_else(|| (config.p - 3.0) / (config.p - 1.0));
    let scatter = scatter_with(config, &config.spectrum.t1, ResidualNorm::Fractional(s))?;
    Ok(SpectrumReport { checks, s, scatter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::InitialSpec;

    fn small() -> RunConfig {
        let mut c = RunConfig::default();
        c.grid.h = 0.2;
        c.grid.half_width = 8.0;
        c.t_final = 2.0;
        c.initial = InitialSpec::Gaussian {
            center: [2.5, 0.0],
            width: 0.5,
            amplitude: 1.0,
        };
        c
    }

    #[test]
    fn drift_of_constant_series_is_zero() {
        let mut s = EnergySeries::new("energy");
        for k in 0..5 {
            s.push(k as f64, 2.0);
        }
        assert_eq!(relative_drift(&s), 0.0);
        s.push(5.0, 2.2);
        assert!((relative_drift(&s) - 0.1).abs() < 1e-12);
        assert_eq!(relative_drift(&EnergySeries::new("e")), 0.0);
    }

    #[test]
    fn series_follow_schedule() {
        let c = small();
        let r = simulate_series(&c, &Schedule::Uniform { step: 0.5 }).unwrap();
        let e = r.get("energy").unwrap();
        let times: Vec<f64> = e.points.iter().map(|p| p.0).collect();
        assert_eq!(times, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(r.series.len(), SERIES_NAMES.len());
        assert!(relative_drift(e) < 1e-2);
        assert_eq!(r.meta.dirichlet_violations, 0);
    }

    #[test]
    fn convergence_needs_nested_grids() {
        let mut c = small();
        c.convergence.levels = vec![0.2, 0.1];
        c.convergence.reference_h = 0.03;
        assert!(matches!(convergence_study(&c), Err(Error::ConfigInvalid(_))));
        c.convergence.levels = vec![0.2];
        assert!(matches!(convergence_study(&c), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn decay_defaults_to_geometric() {
        let c = small();
        assert!(matches!(decay_schedule(&c), Schedule::Geometric { .. }));
        let mut d = small();
        d.schedule = Schedule::Uniform { step: 0.25 };
        assert_eq!(decay_schedule(&d), d.schedule);
    }

    #[test]
    fn spherical_shift_resolves_from_support() {
        let c = small();
        match resolve_field(&c, MultiplierField::Spherical { r_shift: 0.0 }) {
            MultiplierField::Spherical { r_shift } => assert!((r_shift - 6.5).abs() < 1e-12),
            f => panic!("unexpected {f:?}"),
        }
        assert_eq!(resolve_field(&c, MultiplierField::X0), MultiplierField::X0);
    }

    #[test]
    fn spectral_checks_are_exact() {
        let s = spectral_checks(1).unwrap();
        assert!(s.box_max_rel_error < 1e-10);
        assert!(s.quadratic_form_rel_error < 1e-10);
        assert!(s.semigroup_rel_error < 1e-7);
    }
}
