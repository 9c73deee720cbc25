use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::exponents::Exponents;
use super::state::WaveState;
use crate::error::{Error, Result};
use crate::geometry::Domain;

/// Width of the smooth taper that switches data off next to `∂K`.
pub const BOUNDARY_TAPER: f64 = 0.5;

/// Gaussians are cut off smoothly on `[5w, 6w]`; `e^{-25}` is below `1.4e-11`.
const GAUSS_CUT_START: f64 = 5.0;
const GAUSS_CUT_END: f64 = 6.0;

/// Initial-data families. All are compactly supported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    Zero,
    /// `φ0 = A exp(-|x-c|²/w²)`, `φ1 = 0`.
    Gaussian {
        center: [f64; 2],
        width: f64,
        amplitude: f64,
    },
    /// `φ0 = A exp(-(|x|-r0)²/w²)`, `φ1 = 0`.
    Ring {
        radius: f64,
        width: f64,
        amplitude: f64,
    },
    /// Random trigonometric polynomial with integer wave numbers `|k_i| ≤ cutoff`
    /// under a smooth bump of the given radius. Both `φ0` and `φ1` are random.
    RandomSmooth {
        seed: u64,
        cutoff: u32,
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
}

impl InitialSpec {
    /// Radius of a ball about the origin containing the support.
    pub fn support_radius(&self) -> f64 {
        match *self {
            InitialSpec::Zero => 0.0,
            InitialSpec::Gaussian { center, width, .. } => {
                center[0].hypot(center[1]) + GAUSS_CUT_END * width
            }
            InitialSpec::Ring { radius, width, .. } => radius + GAUSS_CUT_END * width,
            InitialSpec::RandomSmooth { center, radius, .. } => {
                center[0].hypot(center[1]) + radius
            }
        }
    }
}

/// C^∞ step: 0 for `u ≤ 0`, 1 for `u ≥ 1`.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    a / (a + b)
}

fn gaussian_cutoff(d: f64, width: f64) -> f64 {
    let core = (-(d / width).powi(2)).exp();
    let span = GAUSS_CUT_END - GAUSS_CUT_START;
    core * (1.0 - smooth_step((d / width - GAUSS_CUT_START) / span))
}

/// Builds `t = 0` data on `domain`, zero on obstacle nodes and on the box
/// frame and tapered to zero within [`BOUNDARY_TAPER`] of `∂K`.
///
/// `horizon` is the final time the data will be evolved to; the box must
/// satisfy `support + horizon + 2h ≤ L`.
pub fn make_initial(
    spec: &InitialSpec,
    domain: &Arc<Domain>,
    exponents: Exponents,
    horizon: f64,
) -> Result<WaveState> {
    let grid = &domain.grid;
    let support = spec.support_radius();
    if support + horizon + 2.0 * grid.h > grid.half_width * (1.0 + 1e-12) {
        return Err(Error::SupportTooLarge {
            support,
            horizon,
            half_width: grid.half_width,
        });
    }

    let mut phi = vec![0.0; grid.len()];
    let mut phit = vec![0.0; grid.len()];

    let random = if let InitialSpec::RandomSmooth { seed, cutoff, .. } = *spec {
        Some(RandomModes::new(seed, cutoff))
    } else {
        None
    };

    for j in 0..grid.n {
        let y = grid.coord(j);
        for &(i0, i1) in domain.mask.row_runs(j) {
            for i in i0..i1 {
                let x = grid.coord(i);
                let k = grid.index(i, j);
                let taper = match &domain.profile {
                    Some(p) => smooth_step(p.radial_gap(x, y) / BOUNDARY_TAPER),
                    None => 1.0,
                };
                if taper == 0.0 {
                    continue;
                }
                let (u0, u1) = match *spec {
                    InitialSpec::Zero => (0.0, 0.0),
                    InitialSpec::Gaussian {
                        center,
                        width,
                        amplitude,
                    } => {
                        let d = (x - center[0]).hypot(y - center[1]);
                        (amplitude * gaussian_cutoff(d, width), 0.0)
                    }
                    InitialSpec::Ring {
                        radius,
                        width,
                        amplitude,
                    } => {
                        let d = (x.hypot(y) - radius).abs();
                        (amplitude * gaussian_cutoff(d, width), 0.0)
                    }
                    InitialSpec::RandomSmooth {
                        center,
                        radius,
                        amplitude,
                        ..
                    } => {
                        let (dx, dy) = (x - center[0], y - center[1]);
                        let bump = smooth_step(2.0 * (1.0 - dx.hypot(dy) / radius));
                        if bump == 0.0 {
                            (0.0, 0.0)
                        } else {
                            let modes = random.as_ref().expect("random modes");
                            let (a, b) = modes.eval(dx / radius, dy / radius);
                            (amplitude * bump * a, amplitude * bump * b)
                        }
                    }
                };
                phi[k] = taper * u0;
                phit[k] = taper * u1;
            }
        }
    }

    Ok(WaveState {
        t: 0.0,
        phi,
        phit,
        exponents,
        domain: Arc::clone(domain),
        history: None,
    })
}

struct RandomModes {
    cutoff: i32,
    /// (cos, sin) coefficient pairs for φ0 then φ1, per wave vector.
    coef: Vec<[f64; 4]>,
    norm: f64,
}

impl RandomModes {
    fn new(seed: u64, cutoff: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = cutoff as i32;
        let mut coef = Vec::new();
        let mut norm = 0.0;
        for kx in -c..=c {
            for ky in -c..=c {
                let damp = 1.0 / (1.0 + (kx * kx + ky * ky) as f64);
                let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0) * damp);
                norm += damp;
                coef.push(v);
            }
        }
        Self {
            cutoff: c,
            coef,
            norm,
        }
    }

    /// Values of `(φ0, φ1)` shapes at scaled offset `(u, v)`.
    fn eval(&self, u: f64, v: f64) -> (f64, f64) {
        let c = self.cutoff;
        let mut a = 0.0;
        let mut b = 0.0;
        let mut idx = 0;
        for kx in -c..=c {
            for ky in -c..=c {
                let arg = std::f64::consts::PI * (kx as f64 * u + ky as f64 * v);
                let (s, co) = arg.sin_cos();
                let w = &self.coef[idx];
                a += w[0] * co + w[1] * s;
                b += w[2] * co + w[3] * s;
                idx += 1;
            }
        }
        (a / self.norm, b / self.norm)
    }
}
