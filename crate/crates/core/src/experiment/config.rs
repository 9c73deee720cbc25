use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::functionals::ResidualNorm;
use crate::geometry::{GridSpec, ProfileSpec};
use crate::multiplier::MultiplierField;
use crate::solver::InitialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    Convergence,
    Decay,
    Scatter,
    Multiplier,
    Flux,
    Spectrum,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Convergence => "convergence",
            Self::Decay => "decay",
            Self::Scatter => "scatter",
            Self::Multiplier => "multiplier",
            Self::Flux => "flux",
            Self::Spectrum => "spectrum",
        }
    }
}

/// Grid spacing, half-width of the box and either `lambda = dt/h` or `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    pub half_width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl GridConfig {
    pub fn lambda(&self) -> Result<f64> {
        match (self.lambda, self.dt) {
            (Some(l), Some(dt)) if (l * self.h - dt).abs() > 1e-12 * dt.abs().max(1.0) => Err(
                Error::ConfigInvalid(format!("grid.lambda = {l} and grid.dt = {dt} disagree")),
            ),
            (Some(l), _) => Ok(l),
            (None, Some(dt)) => Ok(dt / self.h),
            (None, None) => Ok(0.5),
        }
    }

    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.h, self.half_width, self.lambda()?)
    }

    pub fn with_h(&self, h: f64) -> Self {
        let lambda = self.lambda().unwrap_or(0.5);
        Self {
            h,
            half_width: self.half_width,
            lambda: Some(lambda),
            dt: None,
        }
    }
}

/// Times at which diagnostics are recorded. `0` and `T_final` are always
/// included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Uniform { step: f64 },
    /// `t_k = t0·ratio^k`.
    Geometric { t0: f64, ratio: f64 },
    Explicit { times: Vec<f64> },
}

impl Default for Schedule {
    fn default() -> Self {
        Self::Uniform { step: 0.5 }
    }
}

impl Schedule {
    pub fn times(&self, t_final: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0];
        match self {
            Self::Uniform { step } => {
                if !(*step > 0.0) {
                    return Err(Error::ConfigInvalid(format!("schedule step {step}")));
                }
                let n = (t_final / step - 1e-9).floor() as usize;
                out.extend((1..=n).map(|k| k as f64 * step));
            }
            Self::Geometric { t0, ratio } => {
                if !(*t0 > 0.0 && *ratio > 1.0) {
                    return Err(Error::ConfigInvalid(format!(
                        "geometric schedule needs t0 > 0, ratio > 1 (got {t0}, {ratio})"
                    )));
                }
                let mut t = *t0;
                while t < t_final {
                    out.push(t);
                    t *= ratio;
                }
            }
            Self::Explicit { times } => out.extend(times.iter().copied().filter(|&t| t > 0.0 && t < t_final)),
        }
        out.push(t_final);
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceOpts {
    pub levels: Vec<f64>,
    pub reference_h: f64,
}

impl Default for ConvergenceOpts {
    fn default() -> Self {
        Self {
            levels: vec![0.2, 0.1, 0.05],
            reference_h: 0.0125,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayOpts {
    /// Fit window; `[10, 0.8·T_final]` when absent.
    pub window: Option<(f64, f64)>,
}

impl Default for DecayOpts {
    fn default() -> Self {
        Self { window: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterOpts {
    pub t1: Vec<f64>,
    pub norm: ResidualNorm,
}

impl Default for ScatterOpts {
    fn default() -> Self {
        Self {
            t1: vec![10.0, 20.0, 40.0],
            norm: ResidualNorm::Energy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplierOpts {
    /// A spherical field with `r_shift ≤ 0` gets the data support radius
    /// plus one.
    pub field: MultiplierField,
    pub stride: usize,
    /// Times for the finite-difference divergence check (none by default).
    pub divergence_times: Vec<f64>,
    pub divergence_field: MultiplierField,
}

impl Default for MultiplierOpts {
    fn default() -> Self {
        Self {
            field: MultiplierField::Spherical { r_shift: 0.0 },
            stride: 1,
            divergence_times: Vec::new(),
            divergence_field: MultiplierField::X1tilde,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluxOpts {
    pub t_max: f64,
    pub n_t: usize,
    pub n_r: usize,
    pub ps: Vec<f64>,
    /// Obstacle radius when absent.
    pub r_shift: Option<f64>,
    pub n_quad: usize,
    pub angular_samples: usize,
}

impl Default for FluxOpts {
    fn default() -> Self {
        Self {
            t_max: 50.0,
            n_t: 100,
            n_r: 100,
            ps: vec![2.0, 3.0, 4.0, 5.0],
            r_shift: None,
            n_quad: 256,
            angular_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumOpts {
    /// Scattering times for the critical-norm residual.
    pub t1: Vec<f64>,
    /// Sobolev index; the critical `s_p` when absent.
    pub s: Option<f64>,
}

impl Default for SpectrumOpts {
    fn default() -> Self {
        Self {
            t1: vec![4.0, 8.0, 16.0],
            s: None,
        }
    }
}

fn default_true() -> bool {
    true
}

/// One experiment, as a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub p: f64,
    #[serde(default)]
    pub obstacle: Option<ProfileSpec>,
    pub grid: GridConfig,
    pub initial: InitialSpec,
    pub t_final: f64,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default = "default_true")]
    pub nonlinear: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Seed for random initial data; replaces the seed inside `initial`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub convergence: ConvergenceOpts,
    #[serde(default)]
    pub decay: DecayOpts,
    #[serde(default)]
    pub scatter: ScatterOpts,
    #[serde(default)]
    pub multiplier: MultiplierOpts,
    #[serde(default)]
    pub flux: FluxOpts,
    #[serde(default)]
    pub spectrum: SpectrumOpts,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Simulate,
            p: 3.0,
            obstacle: Some(ProfileSpec::disk(1.0)),
            grid: GridConfig {
                h: 0.1,
                half_width: 16.0,
                lambda: Some(0.5),
                dt: None,
            },
            initial: InitialSpec::Gaussian {
                center: [3.0, 0.0],
                width: 0.7,
                amplitude: 1.0,
            },
            t_final: 10.0,
            schedule: Schedule::default(),
            nonlinear: true,
            output: None,
            seed: 0,
            convergence: ConvergenceOpts::default(),
            decay: DecayOpts::default(),
            scatter: ScatterOpts::default(),
            multiplier: MultiplierOpts::default(),
            flux: FluxOpts::default(),
            spectrum: SpectrumOpts::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key.path=value` overrides. Values are parsed as JSON when
    /// possible and taken as strings otherwise.
    pub fn with_overrides(&self, sets: &[String]) -> Result<Self> {
        let mut doc = serde_json::to_value(self).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        for s in sets {
            let (path, raw) = s
                .split_once('=')
                .ok_or_else(|| Error::ConfigInvalid(format!("override `{s}` is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, path, value)?;
        }
        serde_json::from_value(doc).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    /// Initial data with the config seed applied.
    pub fn initial_spec(&self) -> InitialSpec {
        let mut spec = self.initial.clone();
        if let InitialSpec::RandomSmooth { seed, .. } = &mut spec {
            *seed = self.seed;
        }
        spec
    }

    /// Checks the preconditions that do not need a grid to be built.
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::BadP { p: self.p });
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::ConfigInvalid(format!("t_final = {}", self.t_final)));
        }
        self.grid.spec()?;
        self.schedule.times(self.t_final)?;
        Ok(())
    }
}

fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert((*key).to_string(), value);
                    return Ok(());
                }
                map.entry((*key).to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::ConfigInvalid(format!("`{key}` in `{path}` is not an index")))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::ConfigInvalid(format!("index {idx} out of range in `{path}`")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            Value::Null => {
                *cur = Value::Object(Default::default());
                match cur {
                    Value::Object(map) => {
                        if last {
                            map.insert((*key).to_string(), value);
                            return Ok(());
                        }
                        map.entry((*key).to_string())
                            .or_insert_with(|| Value::Object(Default::default()))
                    }
                    _ => unreachable!(),
                }
            }
            _ => return Err(Error::ConfigInvalid(format!("cannot descend into `{key}` of `{path}`"))),
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.grid.h = 0.1 + 0.2;
        c.p = 2.0 * 5f64.sqrt() - 1.0;
        c.obstacle = Some(ProfileSpec::bumpy(vec![1.0, 0.0, 0.13, 0.0, 0.05]));
        c.initial = InitialSpec::RandomSmooth {
            seed: 9,
            cutoff: 3,
            center: [1.0 / 3.0, -2.0],
            radius: 2.5,
            amplitude: 0.7,
        };
        c.schedule = Schedule::Geometric { t0: 0.5, ratio: 1.1 };
        c.scatter.norm = ResidualNorm::Fractional(1.0 / 3.0);
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides() {
        let c = RunConfig::default()
            .with_overrides(&[
                "p=4".into(),
                "grid.h=0.05".into(),
                "experiment=decay".into(),
                "initial.center.0=2.5".into(),
                "multiplier.field={\"kind\":\"x0\"}".into(),
            ])
            .unwrap();
        assert_eq!(c.p, 4.0);
        assert_eq!(c.grid.h, 0.05);
        assert_eq!(c.experiment, Experiment::Decay);
        assert_eq!(c.multiplier.field, MultiplierField::X0);
        match c.initial {
            InitialSpec::Gaussian { center, .. } => assert_eq!(center, [2.5, 0.0]),
            _ => panic!(),
        }
        assert!(RunConfig::default().with_overrides(&["nonsense".into()]).is_err());
        assert!(RunConfig::default().with_overrides(&["bogus_key=1".into()]).is_err());
    }

    #[test]
    fn schedules() {
        assert_eq!(Schedule::Uniform { step: 1.0 }.times(3.0).unwrap(), vec![0.0, 1.0, 2.0, 3.0]);
        let g = Schedule::Geometric { t0: 1.0, ratio: 2.0 }.times(10.0).unwrap();
        assert_eq!(g, vec![0.0, 1.0, 2.0, 4.0, 8.0, 10.0]);
        assert!(Schedule::Geometric { t0: 0.0, ratio: 2.0 }.times(1.0).is_err());
    }

    #[test]
    fn grid_step_choice() {
        let g = GridConfig { h: 0.2, half_width: 4.0, lambda: None, dt: Some(0.05) };
        assert_eq!(g.lambda().unwrap(), 0.25);
        let bad = GridConfig { lambda: Some(0.5), ..g };
        assert!(bad.lambda().is_err());
        let unstable = GridConfig { h: 0.2, half_width: 4.0, lambda: Some(0.9), dt: None };
        assert!(matches!(unstable.spec(), Err(Error::CflViolation { .. })));
    }
}
