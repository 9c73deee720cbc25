use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Experiment, RunConfig};
use super::studies::{
    convergence_study, decay_study, flux_study, multiplier_study, relative_drift, scatter_study,
    simulate_series, spectrum_study,
};
use crate::error::{Error, Result};
use crate::functionals::{linear_fit, write_series_csv, EnergySeries};
use crate::multiplier::write_flux_csv;
use crate::solver::RunMeta;

pub const SERIES_CSV: &str = "series.csv";
pub const FITS_JSON: &str = "fits.json";
pub const FLUX_CSV: &str = "flux_sweep.csv";
pub const IDENTITY_JSON: &str = "identity_report.json";
pub const META_JSON: &str = "run_meta.json";

/// Pass bars used by [`summarize`].
pub mod bars {
    pub const ENERGY_DRIFT: f64 = 1e-3;
    pub const FREE_ORDER: (f64, f64) = (1.7, 2.3);
    pub const OBSTACLE_ORDER: f64 = 1.0;
    pub const POTENTIAL_GROWTH: f64 = 3.0;
    pub const POTENTIAL_SLOPE: f64 = 0.05;
    pub const INTERIOR_SLOPE: f64 = -0.3;
    pub const INTERIOR_R2: f64 = 0.8;
    pub const SCATTER_SLOPE: f64 = -0.2;
    pub const FLUX_MIN: f64 = -1e-10;
    pub const ANGULAR_REL: f64 = 1e-12;
    pub const IDENTITY_RESIDUAL: f64 = 0.02;
    pub const BOX_SPECTRUM: f64 = 1e-10;
    pub const QUADRATIC_FORM: f64 = 1e-10;
    pub const SEMIGROUP: f64 = 1e-7;
}

/// What [`run`] wrote.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<&'static str>,
    pub fits: Value,
}

#[derive(Serialize)]
struct MetaFile<'a> {
    version: &'static str,
    experiment: &'static str,
    seed: u64,
    created_unix: u64,
    config: &'a RunConfig,
    run: Option<&'a RunMeta>,
}

fn tagged(config: &RunConfig, report: &impl Serialize) -> Result<Value> {
    let mut v = serde_json::to_value(report)?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::ConfigInvalid("report is not a JSON object".into()))?;
    obj.insert("experiment".into(), json!(config.experiment.name()));
    obj.insert("p".into(), json!(config.p));
    obj.insert("has_obstacle".into(), json!(config.obstacle.is_some()));
    Ok(v)
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    Ok(w.flush()?)
}

fn write_series(path: &Path, series: &[EnergySeries]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_series_csv(&mut w, series)?;
    Ok(w.flush()?)
}

/// Executes the configured experiment and writes its artifacts into `out`.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunOutcome> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let mut files = vec![FITS_JSON, META_JSON];
    let mut meta: Option<RunMeta> = None;
    let fits = match config.experiment {
        Experiment::Simulate => {
            let run = simulate_series(config, &config.schedule)?;
            write_series(&out.join(SERIES_CSV), &run.series)?;
            files.push(SERIES_CSV);
            let drift = run.get("energy").map(relative_drift);
            let v = json!({
                "energy_drift": drift,
                "dirichlet_violations": run.meta.dirichlet_violations,
            });
            meta = Some(run.meta);
            tagged(config, &v)?
        }
        Experiment::Convergence => tagged(config, &convergence_study(config)?)?,
        Experiment::Decay => {
            let r = decay_study(config)?;
            write_series(&out.join(SERIES_CSV), &r.run.series)?;
            files.push(SERIES_CSV);
            let v = json!({
                "window": r.window,
                "sup_interior": r.sup_interior,
                "weighted_potential": r.weighted_potential,
                "predicted_interior": r.predicted_interior,
                "dirichlet_violations": r.run.meta.dirichlet_violations,
            });
            meta = Some(r.run.meta);
            tagged(config, &v)?
        }
        Experiment::Scatter => {
            let r = scatter_study(config)?;
            let mut s = EnergySeries::new("scattering_residual");
            for (t, v) in r.t1.iter().zip(&r.residuals) {
                s.push(*t, *v);
            }
            write_series(&out.join(SERIES_CSV), &[s])?;
            files.push(SERIES_CSV);
            tagged(config, &r)?
        }
        Experiment::Multiplier => {
            let r = multiplier_study(config)?;
            write_json(&out.join(IDENTITY_JSON), &r.identity)?;
            files.push(IDENTITY_JSON);
            tagged(config, &r)?
        }
        Experiment::Flux => {
            let r = flux_study(config)?;
            let mut w = BufWriter::new(File::create(out.join(FLUX_CSV))?);
            write_flux_csv(&mut w, &r.rows)?;
            w.flush()?;
            files.push(FLUX_CSV);
            tagged(config, &r)?
        }
        Experiment::Spectrum => tagged(config, &spectrum_study(config)?)?,
    };
    write_json(&out.join(FITS_JSON), &fits)?;
    let created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    write_json(
        &out.join(META_JSON),
        &MetaFile {
            version: env!("CARGO_PKG_VERSION"),
            experiment: config.experiment.name(),
            seed: config.seed,
            created_unix,
            config,
            run: meta.as_ref(),
        },
    )?;
    Ok(RunOutcome {
        dir: out.to_path_buf(),
        files,
        fits,
    })
}

/// Parses a `t,name,value` CSV back into named series, in first-seen order.
pub fn read_series_csv(text: &str) -> Result<Vec<EnergySeries>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("t,name,value") {
        return Err(Error::ConfigInvalid("series CSV header is not t,name,value".into()));
    }
    let mut out: Vec<EnergySeries> = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split(',').collect();
        let bad = || Error::ConfigInvalid(format!("bad series row: {line}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let t: f64 = parts[0].parse().map_err(|_| bad())?;
        let v: f64 = parts[2].parse().map_err(|_| bad())?;
        match out.iter_mut().find(|s| s.name == parts[1]) {
            Some(s) => s.push(t, v),
            None => {
                let mut s = EnergySeries::new(parts[1]);
                s.push(t, v);
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// `(min Xr, all sign_ok, rows)` of a flux sweep CSV.
pub fn read_flux_csv(text: &str) -> Result<(f64, bool, usize)> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").trim().split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::ConfigInvalid(format!("flux CSV lacks column {name}")))
    };
    let (xi, si) = (col("Xr_value")?, col("sign_ok")?);
    let (mut min, mut ok, mut rows) = (f64::INFINITY, true, 0);
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split(',').collect();
        let bad = || Error::ConfigInvalid(format!("bad flux row: {line}"));
        let x: f64 = parts.get(xi).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        min = min.min(x);
        ok &= parts.get(si).ok_or_else(bad)?.trim() == "true";
        rows += 1;
    }
    Ok((min, ok, rows))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn num(v: &Value, key: &str) -> Option<f64> {
    v.get(key).and_then(Value::as_f64)
}

/// `(max over t ≤ 1, max overall, log-log slope for t ≥ 1)` of the potential series.
fn potential_stats(s: &EnergySeries) -> (f64, f64, f64) {
    let early = s.max_over(0.0, 1.0).unwrap_or(0.0);
    let all = s.points.iter().map(|p| p.1).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = s.points.iter().copied().filter(|(t, v)| *t >= 1.0 && *v > 0.0).collect();
    let slope = if pts.len() >= 2 {
        let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        linear_fit(&xs, &ys).0
    } else {
        f64::NAN
    };
    (early, all, slope)
}

fn summarize_one(dir: &Path, report: &mut String) -> Result<()> {
    let fits: Value = serde_json::from_str(&fs::read_to_string(dir.join(FITS_JSON))?)?;
    let experiment = fits.get("experiment").and_then(Value::as_str).unwrap_or("unknown");
    let p = num(&fits, "p").unwrap_or(f64::NAN);
    let _ = writeln!(report, "[{}] {experiment}, p = {p}", dir.display());
    let series = match fs::read_to_string(dir.join(SERIES_CSV)) {
        Ok(text) => read_series_csv(&text)?,
        Err(_) => Vec::new(),
    };
    let find = |name: &str| series.iter().find(|s| s.name == name);
    let mut line = |s: String| {
        let _ = writeln!(report, "  {s}");
    };

    if let Some(e) = num(&fits, "energy_drift") {
        line(format!(
            "energy conservation: {} (relative drift = {e:.3e}, bar < {:e})",
            verdict(e < bars::ENERGY_DRIFT),
            bars::ENERGY_DRIFT
        ));
    }
    if let Some(wp) = find("weighted_potential") {
        let (early, all, slope) = potential_stats(wp);
        let ok = all <= bars::POTENTIAL_GROWTH * early && !(slope > bars::POTENTIAL_SLOPE);
        line(format!(
            "potential energy bound: {} (max = {all:.4e}, max on [0,1] = {early:.4e}, slope = {slope:.3}; bars: ratio ≤ {}, slope ≤ {})",
            verdict(ok),
            bars::POTENTIAL_GROWTH,
            bars::POTENTIAL_SLOPE
        ));
    }
    if experiment == "convergence" {
        let order = fits
            .get("orders")
            .and_then(Value::as_array)
            .and_then(|a| a.last())
            .and_then(Value::as_f64)
            .unwrap_or(f64::NAN);
        if fits.get("has_obstacle") == Some(&Value::Bool(true)) {
            line(format!(
                "convergence order with obstacle: {} (order = {order:.3}, bar ≥ {})",
                verdict(order >= bars::OBSTACLE_ORDER),
                bars::OBSTACLE_ORDER
            ));
        } else {
            let (lo, hi) = bars::FREE_ORDER;
            line(format!(
                "free-space convergence order: {} (order = {order:.3}, bar 2.0 ± 0.3)",
                verdict(order >= lo && order <= hi)
            ));
        }
    }
    if let Some(fit) = fits.get("sup_interior") {
        let slope = num(fit, "slope").unwrap_or(f64::NAN);
        let r2 = num(fit, "r2").unwrap_or(f64::NAN);
        let predicted = num(&fits, "predicted_interior").unwrap_or(f64::NAN);
        line(format!(
            "interior decay: {} (measured slope = {slope:.3}, predicted = {predicted:.3}, r² = {r2:.3}; bars: slope ≤ {}, r² ≥ {})",
            verdict(slope <= bars::INTERIOR_SLOPE && r2 >= bars::INTERIOR_R2),
            bars::INTERIOR_SLOPE,
            bars::INTERIOR_R2
        ));
    }
    let scatter = if experiment == "scatter" {
        Some(&fits)
    } else {
        fits.get("scatter")
    };
    if let Some(sc) = scatter {
        let decreasing = sc.get("strictly_decreasing") == Some(&Value::Bool(true));
        let slope = num(sc, "slope").unwrap_or(f64::NAN);
        let tail = num(sc, "predicted_tail").unwrap_or(f64::NAN);
        let above = sc.get("above_energy_threshold") == Some(&Value::Bool(true));
        let fractional = sc.pointer("/norm/kind").and_then(Value::as_str) == Some("fractional");
        let residuals = sc.get("residuals").cloned().unwrap_or(Value::Null);
        if fractional {
            line(format!(
                "critical-norm scattering residual decreasing: {} (residuals = {residuals})",
                verdict(decreasing)
            ));
        } else if above {
            line(format!(
                "energy scattering: {} (decreasing = {decreasing}, slope = {slope:.3}, predicted tail = {tail:.4}; bar slope ≤ {})",
                verdict(decreasing && slope <= bars::SCATTER_SLOPE),
                bars::SCATTER_SLOPE
            ));
        } else {
            line(format!(
                "energy scattering below threshold: REPORTED (decreasing = {decreasing}, slope = {slope:.3}, residuals = {residuals})"
            ));
        }
    }
    if let Ok(text) = fs::read_to_string(dir.join(FLUX_CSV)) {
        let (min, ok, rows) = read_flux_csv(&text)?;
        line(format!(
            "flux positivity: {} (min Xr = {min:.3e} over {rows} rows, bar ≥ {:e})",
            verdict(ok && min >= bars::FLUX_MIN),
            bars::FLUX_MIN
        ));
    }
    if let Some(a) = num(&fits, "max_angular_rel") {
        line(format!(
            "angular component: {} (max relative = {a:.3e}, bar < {:e})",
            verdict(a < bars::ANGULAR_REL),
            bars::ANGULAR_REL
        ));
    }
    if let Some(id) = fits.get("identity") {
        let r = num(id, "residual").unwrap_or(f64::NAN);
        line(format!(
            "energy identity: {} (relative residual = {r:.3e}, bar ≤ {})",
            verdict(r <= bars::IDENTITY_RESIDUAL),
            bars::IDENTITY_RESIDUAL
        ));
    }
    if let Some(div) = fits.get("divergence").filter(|d| !d.is_null()) {
        let rel = num(div, "relative_l1");
        let fd = num(div, "l1_fd").unwrap_or(f64::NAN);
        line(match rel {
            Some(r) => format!("divergence closed form: REPORTED (relative L1 residual = {r:.3e})"),
            None => format!("divergence closed form: REPORTED (closed form vanishes, L1 of FD = {fd:.3e})"),
        });
    }
    if let Some(c) = fits.get("checks") {
        let b = num(c, "box_max_rel_error").unwrap_or(f64::NAN);
        let q = num(c, "quadratic_form_rel_error").unwrap_or(f64::NAN);
        let s = num(c, "semigroup_rel_error").unwrap_or(f64::NAN);
        line(format!(
            "box spectrum: {} (max relative error = {b:.3e}, bar {:e})",
            verdict(b <= bars::BOX_SPECTRUM),
            bars::BOX_SPECTRUM
        ));
        line(format!(
            "quadratic form: {} (relative error = {q:.3e}, bar {:e})",
            verdict(q <= bars::QUADRATIC_FORM),
            bars::QUADRATIC_FORM
        ));
        line(format!(
            "semigroup: {} (relative error = {s:.3e}, bar {:e})",
            verdict(s <= bars::SEMIGROUP),
            bars::SEMIGROUP
        ));
    }
    let violations = num(&fits, "dirichlet_violations")
        .or_else(|| fits.pointer("/scatter/dirichlet_violations").and_then(Value::as_f64));
    if let Some(v) = violations {
        line(format!("Dirichlet invariant: {} (violations = {v})", verdict(v == 0.0)));
    }
    Ok(())
}

fn has_artifacts(dir: &Path) -> bool {
    dir.join(FITS_JSON).is_file()
}

/// Pass/fail report over `dir`, or over each run directory directly below it.
pub fn summarize(dir: &Path) -> Result<String> {
    let mut runs = Vec::new();
    if has_artifacts(dir) {
        runs.push(dir.to_path_buf());
    } else if dir.is_dir() {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() && has_artifacts(&path) {
                runs.push(path);
            }
        }
        runs.sort();
    }
    if runs.is_empty() {
        return Err(Error::MissingArtifacts(format!("no {FITS_JSON} under {}", dir.display())));
    }
    let mut report = String::new();
    for r in &runs {
        summarize_one(r, &mut report)?;
    }
    Ok(report)
}
