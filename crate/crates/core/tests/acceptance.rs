//! Acceptance suite. Run with `cargo test --test acceptance`; pass name
//! fragments as arguments to run a subset.

use std::cell::Cell;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use exwave::experiment::{
    convergence_study, decay_study, flux_study, relative_drift, run, scatter_with, simulate_series,
    spectral_checks, Experiment, RunConfig, Schedule,
};
use exwave::functionals::{linear_fit, ResidualNorm};
use exwave::geometry::ProfileSpec;
use exwave::multiplier::{divergence_check, energy_identity_run, DivRegion, MultiplierField};
use exwave::solver::{evolve, InitialSpec};
use exwave::Result;

thread_local! {
    static VIOLATIONS: Cell<usize> = const { Cell::new(0) };
    static RUNS: Cell<usize> = const { Cell::new(0) };
}

fn record(violations: usize) {
    VIOLATIONS.with(|v| v.set(v.get() + violations));
    RUNS.with(|r| r.set(r.get() + 1));
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn gaussian(center: [f64; 2], width: f64, amplitude: f64) -> InitialSpec {
    InitialSpec::Gaussian {
        center,
        width,
        amplitude,
    }
}

fn base(p: f64, h: f64, half_width: f64, t_final: f64, initial: InitialSpec) -> RunConfig {
    let mut c = RunConfig::default();
    c.p = p;
    c.grid.h = h;
    c.grid.half_width = half_width;
    c.grid.lambda = Some(0.5);
    c.t_final = t_final;
    c.initial = initial;
    c
}

fn energy_conservation() -> Result<Outcome> {
    let drift = |h: f64| -> Result<f64> {
        let c = base(3.0, h, 28.0, 20.0, gaussian([3.0, 0.0], 0.7, 1.0));
        let r = simulate_series(&c, &Schedule::Uniform { step: 0.5 })?;
        record(r.meta.dirichlet_violations);
        Ok(relative_drift(r.get("energy").expect("energy series")))
    };
    let (d1, d2) = (drift(0.1)?, drift(0.05)?);
    let ratio = d1 / d2;
    outcome(
        d1 < 1e-3 && ratio >= 3.0,
        format!("drift {d1:.3e} at h=0.1, {d2:.3e} at h=0.05, ratio {ratio:.2} (bars < 1e-3, ≥ 3)"),
    )
}

fn convergence() -> Result<Outcome> {
    let mut free = base(3.0, 0.1, 12.0, 5.0, gaussian([0.0, 0.0], 1.0, 1.0));
    free.obstacle = None;
    free.convergence.levels = vec![0.2, 0.1, 0.05];
    free.convergence.reference_h = 0.0125;
    let f = convergence_study(&free)?;
    record(f.dirichlet_violations);
    let mut disk = base(3.0, 0.1, 13.0, 5.0, gaussian([3.0, 0.0], 0.7, 1.0));
    disk.obstacle = Some(ProfileSpec::disk(1.0));
    disk.convergence = free.convergence.clone();
    let d = convergence_study(&disk)?;
    record(d.dirichlet_violations);
    let fo = f.observed_order().unwrap_or(f64::NAN);
    let dord = d.observed_order().unwrap_or(f64::NAN);
    outcome(
        (fo - 2.0).abs() <= 0.3 && dord >= 1.0,
        format!(
            "free-space orders {:.3?}, disk orders {:.3?} (bars 2.0 ± 0.3, ≥ 1.0)",
            f.orders, d.orders
        ),
    )
}

fn potential_bound() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [3.0, 4.0, 5.0] {
        let c = base(p, 0.1, 48.0, 40.0, gaussian([3.0, 0.0], 0.7, 1.0));
        let r = simulate_series(&c, &Schedule::Uniform { step: 0.25 })?;
        record(r.meta.dirichlet_violations);
        let wp = r.get("weighted_potential").expect("potential series");
        let early = wp.max_over(0.0, 1.0).unwrap_or(0.0);
        let all = wp.points.iter().map(|x| x.1).fold(0.0, f64::max);
        let pts: Vec<_> = wp.points.iter().filter(|x| x.0 >= 1.0 && x.1 > 0.0).collect();
        let xs: Vec<f64> = pts.iter().map(|x| x.0.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|x| x.1.ln()).collect();
        let slope = linear_fit(&xs, &ys).0;
        let ratio = all / early;
        pass &= ratio <= 3.0 && slope <= 0.05;
        parts.push(format!("p={p}: max ratio {ratio:.3}, slope {slope:.3}"));
    }
    outcome(pass, format!("{} (bars ≤ 3, ≤ 0.05)", parts.join("; ")))
}

fn interior_decay() -> Result<Outcome> {
    let mut c = base(4.0, 0.25, 120.0, 100.0, gaussian([3.0, 0.0], 0.7, 2.0));
    c.experiment = Experiment::Decay;
    c.decay.window = Some((10.0, 80.0));
    let r = decay_study(&c)?;
    record(r.run.meta.dirichlet_violations);
    let f = r.sup_interior;
    outcome(
        f.slope <= -0.3 && f.r_squared >= 0.8,
        format!(
            "slope {:.3}, r² {:.3}, predicted {:.3} (bars slope ≤ -0.3, r² ≥ 0.8)",
            f.slope, f.r_squared, r.predicted_interior
        ),
    )
}

fn energy_scattering() -> Result<Outcome> {
    let cfg = |p: f64| base(p, 0.2, 88.0, 80.0, gaussian([3.0, 0.0], 0.7, 2.0));
    let t1 = [10.0, 20.0, 40.0];
    let main = scatter_with(&cfg(4.0), &t1, ResidualNorm::Energy)?;
    record(main.dirichlet_violations);
    let control = scatter_with(&cfg(2.5), &t1, ResidualNorm::Energy)?;
    record(control.dirichlet_violations);
    outcome(
        main.above_energy_threshold && main.strictly_decreasing && main.slope <= -0.2,
        format!(
            "p=4 residuals {}, slope {:.3} (predicted tail {:.4}; bar ≤ -0.2); control p=2.5 residuals {}, slope {:.3}",
            sci(&main.residuals), main.slope, main.predicted_tail, sci(&control.residuals), control.slope
        ),
    )
}

fn flux_positivity() -> Result<Outcome> {
    let mut c = RunConfig::default();
    c.experiment = Experiment::Flux;
    c.flux.r_shift = Some(1.0);
    let r = flux_study(&c)?;
    outcome(
        r.all_sign_ok && r.min_xr >= -1e-10 && r.max_angular_rel < 1e-12,
        format!(
            "min Xr {:.3e} over {} rows, max angular/Xt {:.3e} over {} samples (bars ≥ -1e-10, < 1e-12)",
            r.min_xr,
            r.rows.len(),
            r.max_angular_rel,
            r.angular_samples
        ),
    )
}

fn divergence_closed_forms() -> Result<Outcome> {
    let probe = |p: f64, h: f64| -> Result<(Option<f64>, f64)> {
        let c = base(p, h, 12.0, 0.2, gaussian([5.0, 0.0], 1.0, 2.0));
        let initial = exwave::experiment::prepare(&c, c.grid.spec()?)?;
        let dt = initial.grid().dt;
        let tc = 0.1;
        let traj = evolve(&initial, tc + dt, &[tc - dt, tc, tc + dt], true)?;
        record(traj.meta.dirichlet_violations);
        let r = divergence_check(&traj, MultiplierField::X1tilde, &DivRegion::default(), &[tc])?;
        Ok((r.relative_l1, r.l1_fd))
    };
    let hs = [0.1, 0.05, 0.025];
    let mut cubic = Vec::new();
    let mut quintic = Vec::new();
    for h in hs {
        cubic.push(probe(3.0, h)?.0.unwrap_or(f64::NAN));
        quintic.push(probe(5.0, h)?.1);
    }
    let decreasing = cubic.windows(2).all(|w| w[1] < w[0]);
    let halves = quintic.windows(2).all(|w| w[1] <= 0.5 * w[0]);
    outcome(
        cubic[1] <= 0.1 && decreasing && halves,
        format!(
            "p=3 relative L1 {} at h {hs:?} (bar ≤ 0.1 at 0.05, decreasing); p=5 L1 of FD {} (halving)",
            sci(&cubic),
            sci(&quintic)
        ),
    )
}

fn stokes_identity() -> Result<Outcome> {
    let mut res = Vec::new();
    for h in [0.1, 0.05] {
        let c = base(3.0, h, 18.0, 10.0, gaussian([3.0, 0.0], 0.7, 1.5));
        let initial = exwave::experiment::prepare(&c, c.grid.spec()?)?;
        let field = MultiplierField::Spherical {
            r_shift: c.initial.support_radius() + 1.0,
        };
        let r = energy_identity_run(&initial, field, c.t_final, true, 1)?;
        res.push(r.residual);
    }
    outcome(
        res[1] <= 0.02 && res[1] < res[0],
        format!("relative residual {} at h [0.1, 0.05] (bar ≤ 0.02, decreasing)", sci(&res)),
    )
}

fn spectral_calculus() -> Result<Outcome> {
    let checks = spectral_checks(0)?;
    let crit = |half_width: f64| -> Result<Vec<f64>> {
        let c = base(4.0, 0.25, half_width, 24.0, gaussian([3.0, 0.0], 0.7, 2.0));
        let s = (c.p - 3.0) / (c.p - 1.0);
        let r = scatter_with(&c, &[4.0, 8.0, 16.0], ResidualNorm::Fractional(s))?;
        record(r.dirichlet_violations);
        Ok(r.residuals)
    };
    let small = crit(40.0)?;
    let large = crit(80.0)?;
    let decreasing = small.windows(2).all(|w| w[1] < w[0]);
    let change = small
        .iter()
        .zip(&large)
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0, f64::max);
    outcome(
        checks.box_max_rel_error <= 1e-10
            && checks.quadratic_form_rel_error <= 1e-10
            && checks.semigroup_rel_error <= 1e-7
            && decreasing
            && change < 0.1,
        format!(
            "box {:.2e}, form {:.2e}, semigroup {:.2e}; critical residuals {}, box doubling change {change:.3e}",
            checks.box_max_rel_error,
            checks.quadratic_form_rel_error,
            checks.semigroup_rel_error,
            sci(&small)
        ),
    )
}

fn determinism() -> Result<Outcome> {
    let a = tempfile::tempdir()?;
    let b = tempfile::tempdir()?;
    let mut c = base(3.0, 0.1, 16.0, 8.0, InitialSpec::Zero);
    c.initial = InitialSpec::RandomSmooth {
        seed: 0,
        cutoff: 4,
        center: [3.0, 0.0],
        radius: 1.5,
        amplitude: 0.8,
    };
    c.seed = 2024;
    c.obstacle = Some(ProfileSpec::bumpy(vec![1.0, 0.0, 0.1, 0.0, 0.05]));
    run(&c, a.path())?;
    run(&c, b.path())?;
    let same = fs::read(a.path().join("series.csv"))? == fs::read(b.path().join("series.csv"))?;
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.path().join("fits.json"))?)?;
    record(v["dirichlet_violations"].as_u64().unwrap_or(u64::MAX) as usize);
    let violations = VIOLATIONS.with(Cell::get);
    let runs = RUNS.with(Cell::get);
    outcome(
        same && violations == 0,
        format!("series.csv identical: {same}; obstacle-node violations {violations} over {runs} runs"),
    )
}

type Check = fn() -> Result<Outcome>;

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let checks: [(&str, Check); 10] = [
        ("energy conservation", energy_conservation),
        ("convergence order", convergence),
        ("potential energy bound", potential_bound),
        ("interior decay", interior_decay),
        ("energy scattering", energy_scattering),
        ("flux positivity", flux_positivity),
        ("divergence closed forms", divergence_closed_forms),
        ("energy identity", stokes_identity),
        ("spectral calculus", spectral_calculus),
        ("determinism and Dirichlet invariant", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (verdict, detail) = match check() {
            Ok(o) => (if o.pass { "PASS" } else { "FAIL" }, o.detail),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("{name}: {verdict} ({detail}) [{:.1} s]", start.elapsed().as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
