use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::fields::{FieldId, MultiplierEval};
use crate::error::{Error, Result};
use crate::quadrature::{periodic_trapezoid, romberg};

const DOUBLING_TOL: f64 = 1e-8;

/// Polar data of the smooth branch X̃₂ at angle `α` in its own frame, at time
/// `tt` and radius `r`: `[Xt, Xr, Xθ, χ, ∂tχ, ∂rχ, w]` with `w` the divergence
/// weight `((5-p)/2)s^{(p-7)/2}`.
fn second_branch(tt: f64, r: f64, p: f64, alpha: f64) -> [f64; 7] {
    let (sa, ca) = alpha.sin_cos();
    let s = tt - r * ca + 1.0;
    let y = r * sa;
    let a = s.powf(0.5 * (p - 1.0));
    let b = s.powf(0.5 * (p - 3.0));
    let c = s.powf(0.5 * (p - 5.0));
    let v1 = -a + c * y * y;
    let v2 = 2.0 * b * y;
    let chi_t = 0.5 * (p - 3.0) * c;
    [
        a + c * y * y,
        v1 * ca + v2 * sa,
        -v1 * sa + v2 * ca,
        b,
        chi_t,
        -chi_t * ca,
        0.5 * (5.0 - p) * s.powf(0.5 * (p - 7.0)),
    ]
}

/// Same layout for `4X̃₁` (weight slot left at zero).
fn first_branch(tt: f64, r: f64, alpha: f64) -> [f64; 7] {
    let (sa, ca) = alpha.sin_cos();
    let u = tt - r * ca;
    let y = r * sa;
    let v1 = 4.0 * (y * y - u * u);
    let v2 = 8.0 * u * y;
    [
        4.0 * (y * y + u * u + 1.0),
        v1 * ca + v2 * sa,
        -v1 * sa + v2 * ca,
        4.0 * u,
        4.0,
        -4.0 * ca,
        0.0,
    ]
}

fn add(acc: &mut [f64; 7], v: [f64; 7], w: f64) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += w * b;
    }
}

/// Romberg on all seven slots at once, sharing the integrand evaluations.
/// Converges when the extrapolated vector stops moving relative to the
/// size of its first two slots.
fn romberg_vec(a: f64, b: f64, f: impl Fn(f64) -> [f64; 7]) -> ([f64; 7], f64) {
    const MAX_LEVELS: usize = 22;
    let width = b - a;
    if width == 0.0 {
        return ([0.0; 7], 0.0);
    }
    let mut trap = f(a);
    add(&mut trap, f(b), 1.0);
    trap.iter_mut().for_each(|v| *v *= 0.5 * width);
    let mut prev = vec![trap];
    let mut intervals = 1usize;
    let mut err = f64::INFINITY;
    for level in 1..=MAX_LEVELS {
        let h = width / (2 * intervals) as f64;
        let mut mid = [0.0; 7];
        for k in 0..intervals {
            add(&mut mid, f(a + h * (2 * k + 1) as f64), 1.0);
        }
        intervals *= 2;
        let mut row = Vec::with_capacity(level + 1);
        let mut t0 = [0.0; 7];
        for k in 0..7 {
            t0[k] = 0.5 * prev[0][k] + h * mid[k];
        }
        row.push(t0);
        let mut factor = 1.0;
        for m in 1..=level.min(8) {
            factor *= 4.0;
            let mut v = [0.0; 7];
            for k in 0..7 {
                v[k] = row[m - 1][k] + (row[m - 1][k] - prev[m - 1][k]) / (factor - 1.0);
            }
            row.push(v);
        }
        let best = *row.last().expect("row is non-empty");
        let last = *prev.last().expect("row is non-empty");
        let scale = best[0].abs().max(best[1].abs()).max(f64::MIN_POSITIVE);
        err = (0..7)
            .filter(|k| best[*k].is_finite())
            .map(|k| (best[k] - last[k]).abs())
            .fold(0.0, f64::max);
        if level >= 4 && err <= 1e-13 * scale {
            return (best, err);
        }
        prev = row;
    }
    (*prev.last().expect("row is non-empty"), err)
}

/// Angular average `X(t, r) = ∫ X̃(t+R, r, θ′) dθ′` of the mixed field.
///
/// For `r ≤ t+R` only the X̃₂ branch is active and the integrand is smooth
/// and periodic. Otherwise the circle splits into two arcs at
/// `cos α = (t+R)/r`, each integrated separately.
pub fn spherical_x(t: f64, r: f64, p: f64, r_shift: f64, n_quad: usize) -> Result<MultiplierEval> {
    if n_quad < 64 {
        return Err(Error::ConfigInvalid(format!("n_quad = {n_quad} is below 64")));
    }
    if !(r >= 0.0) {
        return Err(Error::DomainViolation(format!("negative radius {r}")));
    }
    let tt = t + r_shift;
    let (vals, change) = if r <= tt {
        let step = 2.0 * PI / (2 * n_quad) as f64;
        let mut even = [0.0; 7];
        let mut odd = [0.0; 7];
        for k in 0..2 * n_quad {
            let v = second_branch(tt, r, p, step * k as f64);
            add(if k % 2 == 0 { &mut even } else { &mut odd }, v, 1.0);
        }
        let mut fine = [0.0; 7];
        let mut change: f64 = 0.0;
        for k in 0..7 {
            fine[k] = (even[k] + odd[k]) * step;
            if k < 2 {
                change = change.max((fine[k] - 2.0 * even[k] * step).abs());
            }
        }
        (fine, change)
    } else {
        let a0 = (tt / r).acos();
        let (first, e1) = romberg_vec(-a0, a0, |al| first_branch(tt, r, al));
        let (second, e2) = romberg_vec(a0, 2.0 * PI - a0, |al| second_branch(tt, r, p, al));
        let mut v = first;
        add(&mut v, second, 1.0);
        v[6] = f64::NAN;
        (v, e1 + e2)
    };
    let scale = vals[0].abs().max(vals[1].abs()).max(f64::MIN_POSITIVE);
    if change / scale > DOUBLING_TOL {
        return Err(Error::QuadratureUnderresolved {
            rel_change: change / scale,
        });
    }
    Ok(MultiplierEval {
        field_id: FieldId::Spherical,
        xt: vals[0],
        xr: vals[1],
        x1: vals[1],
        x2: 0.0,
        x_theta: vals[2],
        chi: vals[3],
        dchi: [vals[4], vals[5], 0.0],
        div_closed_form: vals[6],
        point: [t, r, 0.0],
    })
}

/// Value of the folded radial component together with its three parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxValue {
    pub value: f64,
    pub terms: [f64; 3],
    pub error: f64,
    pub sign_ok: bool,
}

/// `X^r(t, r)` written as three integrals over `[0, π/2]` whose integrands
/// are each non-negative when `t+R ≥ r` and `p ≤ 5`.
pub fn boundary_flux_xr(t: f64, r: f64, p: f64, r_shift: f64, n_quad: usize) -> Result<FluxValue> {
    let tt = t + r_shift;
    if r > tt {
        return Err(Error::RegimeViolation { t, r, r_shift });
    }
    let levels = (n_quad.max(2) as f64).log2().ceil() as usize + 6;
    let ends = |th: f64| {
        let c = th.cos();
        (tt - r * c + 1.0, tt + r * c + 1.0, c, th.sin())
    };
    let i1 = romberg(0.0, FRAC_PI_2, 1e-13, 1e-15, levels, |th| {
        let (a, b, c, _) = ends(th);
        2.0 * (b.powf(0.5 * (p - 1.0)) - a.powf(0.5 * (p - 1.0))) * c
    });
    let i2 = romberg(0.0, FRAC_PI_2, 1e-13, 1e-15, levels, |th| {
        let (a, b, c, s) = ends(th);
        2.0 * (a.powf(0.5 * (p - 5.0)) - b.powf(0.5 * (p - 5.0))) * r * r * c * s * s
    });
    let i3 = romberg(0.0, FRAC_PI_2, 1e-13, 1e-15, levels, |th| {
        let (a, b, _, s) = ends(th);
        4.0 * (a.powf(0.5 * (p - 3.0)) + b.powf(0.5 * (p - 3.0))) * r * s * s
    });
    let value = i1.value + i2.value + i3.value;
    let error = i1.error + i2.error + i3.error;
    Ok(FluxValue {
        value,
        terms: [i1.value, i2.value, i3.value],
        error,
        sign_ok: value >= -(error + 1e-12),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxRow {
    pub t: f64,
    pub r: f64,
    pub p: f64,
    #[serde(rename = "R")]
    pub r_shift: f64,
    pub xr_value: f64,
    pub sign_ok: bool,
}

/// `n_t × n_r` grid over `t ∈ [0, t_max]`, `r ∈ [0, t+R]` for every `p`.
pub fn flux_sweep(t_max: f64, n_t: usize, n_r: usize, ps: &[f64], r_shift: f64, n_quad: usize) -> Result<Vec<FluxRow>> {
    let mut points = Vec::with_capacity(ps.len() * n_t * n_r);
    for &p in ps {
        for i in 0..n_t {
            let t = t_max * i as f64 / (n_t.max(2) - 1) as f64;
            for j in 0..n_r {
                let r = (t + r_shift) * j as f64 / (n_r.max(2) - 1) as f64;
                points.push((t, r.min(t + r_shift), p));
            }
        }
    }
    points
        .par_iter()
        .map(|&(t, r, p)| {
            boundary_flux_xr(t, r, p, r_shift, n_quad).map(|f| FluxRow {
                t,
                r,
                p,
                r_shift,
                xr_value: f.value,
                sign_ok: f.sign_ok,
            })
        })
        .collect()
}

pub fn write_flux_csv(w: &mut impl Write, rows: &[FluxRow]) -> Result<()> {
    writeln!(w, "t,r,p,R,Xr_value,sign_ok")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{:e},{}",
            row.t, row.r, row.p, row.r_shift, row.xr_value, row.sign_ok
        )?;
    }
    Ok(())
}

/// Interpolated spherical-field data at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalSample {
    pub xt: f64,
    pub xr: f64,
    pub chi: f64,
    pub chi_t: f64,
    pub chi_r: f64,
    /// Symmetric bulk form in `(φt, φr, φτ)`, stored as `[00, 01, 02, 11, 12, 22]`.
    pub m: [f64; 6],
}

impl SphericalSample {
    /// `∂^μJ_μ` for the derivative triple `(φt, φr, φτ)`.
    pub fn bulk(&self, v: [f64; 3]) -> f64 {
        let m = &self.m;
        m[0] * v[0] * v[0]
            + m[3] * v[1] * v[1]
            + m[5] * v[2] * v[2]
            + 2.0 * (m[1] * v[0] * v[1] + m[2] * v[0] * v[2] + m[4] * v[1] * v[2])
    }
}

/// Radial table of the spherical field on the smooth regime `r ≤ t+R`, with
/// linear interpolation in between.
#[derive(Debug, Clone)]
pub struct SphericalTable {
    pub t: f64,
    dr: f64,
    r_limit: f64,
    rows: Vec<[f64; 11]>,
}

impl SphericalTable {
    pub fn build(t: f64, p: f64, r_shift: f64, r_max: f64, dr: f64, n_quad: usize) -> Self {
        let tt = t + r_shift;
        let r_limit = r_max.min(tt);
        let n = (r_limit / dr).ceil() as usize + 1;
        let dr = if n > 1 { r_limit / (n - 1) as f64 } else { dr };
        let rows = (0..n)
            .into_par_iter()
            .map(|i| {
                let r = dr * i as f64;
                let mut acc = [0.0; 11];
                periodic_trapezoid(n_quad, 0.0, |al| {
                    let v = second_branch(tt, r, p, al);
                    let (sa, ca) = al.sin_cos();
                    let s = tt - r * ca + 1.0;
                    let q = [r * sa, r * sa * ca + s * sa, -r * sa * sa + s * ca];
                    let w = v[6];
                    let vals = [
                        v[0],
                        v[1],
                        v[3],
                        v[4],
                        v[5],
                        w * q[0] * q[0],
                        w * q[0] * q[1],
                        w * q[0] * q[2],
                        w * q[1] * q[1],
                        w * q[1] * q[2],
                        w * q[2] * q[2],
                    ];
                    for (a, b) in acc.iter_mut().zip(vals) {
                        *a += b;
                    }
                    0.0
                });
                let step = 2.0 * PI / n_quad as f64;
                acc.map(|a| a * step)
            })
            .collect();
        Self { t, dr, r_limit, rows }
    }

    pub fn r_limit(&self) -> f64 {
        self.r_limit
    }

    pub fn sample(&self, r: f64) -> Option<SphericalSample> {
        if r > self.r_limit || self.rows.is_empty() {
            return None;
        }
        let x = r / self.dr;
        let i = (x.floor() as usize).min(self.rows.len().saturating_sub(2));
        let w = if self.rows.len() > 1 { x - i as f64 } else { 0.0 };
        let a = &self.rows[i];
        let b = &self.rows[(i + 1).min(self.rows.len() - 1)];
        let v: Vec<f64> = a.iter().zip(b).map(|(a, b)| a + w * (b - a)).collect();
        Some(SphericalSample {
            xt: v[0],
            xr: v[1],
            chi: v[2],
            chi_t: v[3],
            chi_r: v[4],
            m: [v[5], v[6], v[7], v[8], v[9], v[10]],
        })
    }
}
