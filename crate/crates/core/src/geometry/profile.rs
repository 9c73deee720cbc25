use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::periodic_trapezoid;

/// Obstacle families, all radial graphs `r = ρ(θ)` about the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// `coeffs = [radius]`.
    Disk,
    /// Polar graph of an origin-centred ellipse, `coeffs = [a, b]`.
    EllipseGraph,
    /// Cosine series `ρ = c0 + Σ c_k cos(kθ)`, `coeffs = [c0, c1, ...]`.
    Bumpy,
    /// Raw samples `ρ(2πk/n)`, `coeffs` of length `n_theta`.
    Table,
}

/// Serialized form of a profile: `{"kind": ..., "coeffs": [...], "n_theta": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    pub coeffs: Vec<f64>,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
}

fn default_n_theta() -> usize {
    256
}

impl ProfileSpec {
    pub fn disk(radius: f64) -> Self {
        Self {
            kind: ProfileKind::Disk,
            coeffs: vec![radius],
            n_theta: default_n_theta(),
        }
    }

    pub fn bumpy(coeffs: Vec<f64>) -> Self {
        Self {
            kind: ProfileKind::Bumpy,
            coeffs,
            n_theta: default_n_theta(),
        }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        Self {
            kind: ProfileKind::EllipseGraph,
            coeffs: vec![a, b],
            n_theta: 512,
        }
    }
}

/// Star-shaped obstacle `K = {|x| ≤ ρ(θ)}` stored as a periodic sample table
/// with its trigonometric interpolant.
#[derive(Debug, Clone)]
pub struct ObstacleProfile {
    spec: ProfileSpec,
    /// `ρ(θ_k)` for `k = 0..=n_theta`; the last entry repeats the first.
    samples: Vec<f64>,
    cos_coef: Vec<f64>,
    sin_coef: Vec<f64>,
    r_outer: f64,
}

/// A quadrature node on `∂K`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPoint {
    pub theta: f64,
    pub point: [f64; 2],
    pub normal: [f64; 2],
    pub weight: f64,
}

const DENSE_CHECK: usize = 100_000;

/// Builds and validates a profile.
pub fn build_profile(spec: &ProfileSpec) -> Result<ObstacleProfile> {
    let n = spec.n_theta;
    if n < 8 || n % 2 != 0 {
        return Err(Error::BadProfile(format!(
            "n_theta must be even and >= 8, got {n}"
        )));
    }
    let theta = |k: usize| 2.0 * PI * k as f64 / n as f64;
    let mut samples: Vec<f64> = match spec.kind {
        ProfileKind::Disk => {
            let [radius] = spec.coeffs[..] else {
                return Err(Error::BadProfile("disk takes one coefficient".into()));
            };
            vec![radius; n]
        }
        ProfileKind::EllipseGraph => {
            let [a, b] = spec.coeffs[..] else {
                return Err(Error::BadProfile("ellipse-graph takes [a, b]".into()));
            };
            if a <= 0.0 || b <= 0.0 {
                return Err(Error::NonPositiveRadius {
                    theta: 0.0,
                    rho: a.min(b),
                });
            }
            (0..n)
                .map(|k| {
                    let (s, c) = theta(k).sin_cos();
                    a * b / ((b * c).powi(2) + (a * s).powi(2)).sqrt()
                })
                .collect()
        }
        ProfileKind::Bumpy => {
            if spec.coeffs.is_empty() {
                return Err(Error::BadProfile("bumpy needs coefficients".into()));
            }
            if 2 * spec.coeffs.len() > n {
                return Err(Error::BadProfile(format!(
                    "cosine degree {} not resolved by n_theta = {n}",
                    spec.coeffs.len() - 1
                )));
            }
            (0..n)
                .map(|k| {
                    let t = theta(k);
                    spec.coeffs
                        .iter()
                        .enumerate()
                        .map(|(m, c)| c * (m as f64 * t).cos())
                        .sum()
                })
                .collect()
        }
        ProfileKind::Table => {
            if spec.coeffs.len() != n {
                return Err(Error::BadProfile(format!(
                    "table has {} samples, n_theta = {n}",
                    spec.coeffs.len()
                )));
            }
            spec.coeffs.clone()
        }
    };

    if let Some((k, &rho)) = samples.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
        return Err(Error::NonPositiveRadius {
            theta: theta(k),
            rho,
        });
    }

    let (cos_coef, sin_coef) = trig_coefficients(&samples);
    samples.push(samples[0]);
    let mut profile = ObstacleProfile {
        spec: spec.clone(),
        samples,
        cos_coef,
        sin_coef,
        r_outer: 0.0,
    };

    // The interpolant can dip below the samples between nodes.
    let mut r_outer: f64 = 0.0;
    for k in 0..DENSE_CHECK {
        let t = 2.0 * PI * k as f64 / DENSE_CHECK as f64;
        let (rho, drho) = profile.rho_and_derivative(t);
        if !(rho > 0.0) {
            return Err(Error::NonPositiveRadius { theta: t, rho });
        }
        let x_dot_n = rho * rho / (rho * rho + drho * drho).sqrt();
        if !(x_dot_n > 0.0) {
            return Err(Error::NonStarShaped { theta: t, x_dot_n });
        }
        r_outer = r_outer.max(rho);
    }
    profile.r_outer = r_outer.max(profile.samples.iter().cloned().fold(0.0, f64::max));
    Ok(profile)
}

/// Real DFT coefficients of an even-length periodic table.
fn trig_coefficients(samples: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let half = n / 2;
    let mut a = vec![0.0; half + 1];
    let mut b = vec![0.0; half + 1];
    for (k, (ak, bk)) in a.iter_mut().zip(b.iter_mut()).enumerate() {
        let (mut sa, mut sb) = (0.0, 0.0);
        for (j, &v) in samples.iter().enumerate() {
            let arg = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
            sa += v * arg.cos();
            sb += v * arg.sin();
        }
        *ak = 2.0 * sa / n as f64;
        *bk = 2.0 * sb / n as f64;
    }
    a[0] *= 0.5;
    a[half] *= 0.5;
    b[half] = 0.0;
    // drop round-off modes so that e.g. a disk is evaluated exactly
    let scale = a.iter().chain(&b).fold(0.0f64, |m, v| m.max(v.abs()));
    for v in a.iter_mut().chain(b.iter_mut()) {
        if v.abs() < 1e-14 * scale {
            *v = 0.0;
        }
    }
    (a, b)
}

impl ObstacleProfile {
    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    pub fn n_theta(&self) -> usize {
        self.spec.n_theta
    }

    /// Sample table including the repeated endpoint.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Smallest `R` with `K ⊂ B_R`.
    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    pub fn rho(&self, theta: f64) -> f64 {
        self.rho_and_derivative(theta).0
    }

    /// `(ρ(θ), ρ'(θ))` from the trigonometric interpolant.
    pub fn rho_and_derivative(&self, theta: f64) -> (f64, f64) {
        let (s1, c1) = theta.sin_cos();
        let (mut ck, mut sk) = (1.0, 0.0);
        let mut rho = 0.0;
        let mut drho = 0.0;
        for (k, (a, b)) in self.cos_coef.iter().zip(&self.sin_coef).enumerate() {
            let kf = k as f64;
            rho += a * ck + b * sk;
            drho += kf * (b * ck - a * sk);
            let next_c = ck * c1 - sk * s1;
            sk = sk * c1 + ck * s1;
            ck = next_c;
        }
        (rho, drho)
    }

    /// Outward unit normal of `∂K` at polar angle `θ`.
    pub fn boundary_normal(&self, theta: f64) -> [f64; 2] {
        let (rho, drho) = self.rho_and_derivative(theta);
        let (s, c) = theta.sin_cos();
        let norm = (rho * rho + drho * drho).sqrt();
        // radial component ρ, angular component -ρ'
        [(rho * c + drho * s) / norm, (rho * s - drho * c) / norm]
    }

    /// `x · N_K` at the boundary point of angle `θ`.
    pub fn x_dot_normal(&self, theta: f64) -> f64 {
        let (rho, drho) = self.rho_and_derivative(theta);
        rho * rho / (rho * rho + drho * drho).sqrt()
    }

    /// `(θ*, min_θ x·N)` over `n` equispaced angles.
    pub fn min_x_dot_normal(&self, n: usize) -> (f64, f64) {
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                (t, self.x_dot_normal(t))
            })
            .fold((0.0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc })
    }

    /// `|x| - ρ(arg x)`: positive outside `K`.
    pub fn radial_gap(&self, x: f64, y: f64) -> f64 {
        x.hypot(y) - self.rho(y.atan2(x))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let r = x.hypot(y);
        r <= self.r_outer && r <= self.rho(y.atan2(x))
    }

    /// `½∫ρ² dθ`.
    pub fn area(&self) -> f64 {
        0.5 * periodic_trapezoid(4 * self.n_theta(), 0.0, |t| self.rho(t).powi(2))
    }

    /// `n` equispaced boundary nodes with arc-length trapezoid weights.
    pub fn boundary_quadrature(&self, n: usize) -> Vec<BoundaryPoint> {
        let n = n.max(8);
        let step = 2.0 * PI / n as f64;
        (0..n)
            .map(|k| {
                let theta = step * k as f64;
                let (rho, drho) = self.rho_and_derivative(theta);
                let (s, c) = theta.sin_cos();
                BoundaryPoint {
                    theta,
                    point: [rho * c, rho * s],
                    normal: self.boundary_normal(theta),
                    weight: step * (rho * rho + drho * drho).sqrt(),
                }
            })
            .collect()
    }
}
