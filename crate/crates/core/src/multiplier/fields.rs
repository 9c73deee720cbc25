use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minkowski metric signs, `m = diag(-1, 1, 1)`.
pub const METRIC: [f64; 3] = [-1.0, 1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldId {
    X0,
    X1tilde,
    X2tilde,
    Mixed,
    Spherical,
}

/// A multiplier `(X, χ)` evaluated at one spacetime point.
///
/// `xt`, `xr` are the time and radial components. `x1`, `x2` are the
/// Cartesian spatial components in the frame the field was evaluated in.
/// `div_closed_form` is the coefficient of the divergence template; see
/// [`MultiplierEval::divergence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierEval {
    pub field_id: FieldId,
    pub xt: f64,
    pub xr: f64,
    pub x1: f64,
    pub x2: f64,
    pub x_theta: f64,
    pub chi: f64,
    /// `(∂tχ, ∂1χ, ∂2χ)`.
    pub dchi: [f64; 3],
    pub div_closed_form: f64,
    pub(crate) point: [f64; 3],
}

impl MultiplierEval {
    /// `X^μ` as `(X^t, X^1, X^2)`.
    pub fn vector(&self) -> [f64; 3] {
        [self.xt, self.x1, self.x2]
    }

    /// `∂^μJ_μ` for a solution with value `phi` and derivatives `dphi` at
    /// the evaluation point.
    ///
    /// X⁰ and X̃₁ carry a `|φ|^{p+1}` template, X̃₂ a squared derivative
    /// combination. The spherical field has no pointwise template here; its
    /// bulk term lives in [`super::SphericalTable`].
    pub fn divergence(&self, phi: f64, dphi: [f64; 3], p: f64) -> f64 {
        match self.field_id {
            FieldId::X0 | FieldId::X1tilde => self.div_closed_form * phi.abs().powf(p + 1.0),
            FieldId::X2tilde => {
                let [t, x1, x2] = self.point;
                let s = t - x1 + 1.0;
                let q = x2 * (dphi[0] + dphi[1]) + s * dphi[2];
                self.div_closed_form * q * q
            }
            FieldId::Mixed => {
                let [t, x1, _] = self.point;
                if t <= x1 {
                    self.div_closed_form * phi.abs().powf(p + 1.0)
                } else {
                    let mut inner = *self;
                    inner.field_id = FieldId::X2tilde;
                    inner.divergence(phi, dphi, p)
                }
            }
            FieldId::Spherical => f64::NAN,
        }
    }
}

/// `T_{μν} = ∂_μφ ∂_νφ - ½ m_{μν}(∂^σφ ∂_σφ + 2|φ|^{p+1}/(p+1))`.
pub fn energy_momentum(dphi: [f64; 3], phi: f64, p: f64) -> [[f64; 3]; 3] {
    let q = -dphi[0] * dphi[0] + dphi[1] * dphi[1] + dphi[2] * dphi[2];
    let lag = q + 2.0 * phi.abs().powf(p + 1.0) / (p + 1.0);
    let mut t = [[0.0; 3]; 3];
    for mu in 0..3 {
        for nu in 0..3 {
            t[mu][nu] = dphi[mu] * dphi[nu];
        }
        t[mu][mu] -= 0.5 * METRIC[mu] * lag;
    }
    t
}

/// `J_μ = T_{μν}X^ν - ½∂_μχ |φ|² + χ φ ∂_μφ`.
pub fn current(t: &[[f64; 3]; 3], x: [f64; 3], chi: f64, dchi: [f64; 3], phi: f64, dphi: [f64; 3]) -> [f64; 3] {
    let mut j = [0.0; 3];
    for mu in 0..3 {
        j[mu] = t[mu][0] * x[0] + t[mu][1] * x[1] + t[mu][2] * x[2] - 0.5 * dchi[mu] * phi * phi
            + chi * phi * dphi[mu];
    }
    j
}

/// Tensor and current at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentSample {
    pub j: [f64; 3],
    pub t: [[f64; 3]; 3],
}

pub fn current_sample(eval: &MultiplierEval, phi: f64, dphi: [f64; 3], p: f64) -> CurrentSample {
    let t = energy_momentum(dphi, phi, p);
    CurrentSample {
        j: current(&t, eval.vector(), eval.chi, eval.dchi, phi, dphi),
        t,
    }
}

/// `X = (r²+t²+1)∂t + 2tr∂r` with `χ = t`, on the ray through `(r, 0)`.
pub fn eval_x0(t: f64, r: f64, p: f64) -> MultiplierEval {
    eval_x0_at(t, r, 0.0, p)
}

/// The conformal field at the Cartesian point `(x, y)`.
pub fn eval_x0_at(t: f64, x: f64, y: f64, p: f64) -> MultiplierEval {
    let r = x.hypot(y);
    MultiplierEval {
        field_id: FieldId::X0,
        xt: r * r + t * t + 1.0,
        xr: 2.0 * t * r,
        x1: 2.0 * t * x,
        x2: 2.0 * t * y,
        x_theta: 0.0,
        chi: t,
        dchi: [1.0, 0.0, 0.0],
        div_closed_form: (p - 5.0) / (p + 1.0) * t,
        point: [t, x, y],
    }
}

/// Radial and angular parts of the spatial components at `(x1, x2)`.
fn polar(x1: f64, x2: f64, v: [f64; 3]) -> (f64, f64) {
    let r = x1.hypot(x2);
    if r == 0.0 {
        return (v[1], v[2]);
    }
    ((v[1] * x1 + v[2] * x2) / r, (-v[1] * x2 + v[2] * x1) / r)
}

pub fn eval_x1(t: f64, x1: f64, x2: f64, p: f64) -> MultiplierEval {
    let u = t - x1;
    let v = [x2 * x2 + u * u + 1.0, x2 * x2 - u * u, 2.0 * u * x2];
    let (xr, x_theta) = polar(x1, x2, v);
    MultiplierEval {
        field_id: FieldId::X1tilde,
        xt: v[0],
        xr,
        x1: v[1],
        x2: v[2],
        x_theta,
        chi: u,
        dchi: [1.0, -1.0, 0.0],
        div_closed_form: (5.0 - p) / (p + 1.0) * (x1 - t),
        point: [t, x1, x2],
    }
}

/// The field used on `{t ≥ x₁}`, with `χ = (t-x₁+1)^{(p-3)/2}`.
pub fn eval_x2(t: f64, x1: f64, x2: f64, p: f64) -> Result<MultiplierEval> {
    let s = t - x1 + 1.0;
    if !(s > 0.0) {
        return Err(Error::DomainViolation(format!(
            "t - x1 + 1 = {s} must be positive"
        )));
    }
    let a = s.powf(0.5 * (p - 1.0));
    let b = s.powf(0.5 * (p - 3.0));
    let c = s.powf(0.5 * (p - 5.0));
    let v = [a + c * x2 * x2, -a + c * x2 * x2, 2.0 * b * x2];
    let (xr, x_theta) = polar(x1, x2, v);
    let chi_t = 0.5 * (p - 3.0) * c;
    Ok(MultiplierEval {
        field_id: FieldId::X2tilde,
        xt: v[0],
        xr,
        x1: v[1],
        x2: v[2],
        x_theta,
        chi: b,
        dchi: [chi_t, -chi_t, 0.0],
        div_closed_form: 0.5 * (5.0 - p) * s.powf(0.5 * (p - 7.0)),
        point: [t, x1, x2],
    })
}

/// `4X̃₁` on `{t ≤ x₁}` and `X̃₂` on `{t > x₁}`.
pub fn eval_mixed(t: f64, x1: f64, x2: f64, p: f64) -> Result<MultiplierEval> {
    let mut e = if t <= x1 {
        let mut e = eval_x1(t, x1, x2, p);
        for v in [
            &mut e.xt,
            &mut e.xr,
            &mut e.x1,
            &mut e.x2,
            &mut e.x_theta,
            &mut e.chi,
            &mut e.div_closed_form,
        ] {
            *v *= 4.0;
        }
        e.dchi = e.dchi.map(|d| 4.0 * d);
        e
    } else {
        eval_x2(t, x1, x2, p)?
    };
    e.field_id = FieldId::Mixed;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tensor_basics() {
        assert_eq!(energy_momentum([0.0; 3], 0.0, 3.0), [[0.0; 3]; 3]);
        let t = energy_momentum([1.0, 0.0, 0.0], 0.0, 3.0);
        assert_eq!(t[0][0], 0.5);
        let dphi = [0.3, -1.2, 0.7];
        let phi = 0.9;
        let p = 3.0;
        let t = energy_momentum(dphi, phi, p);
        let pot = phi.powi(4) / 4.0;
        let t00 = 0.5 * (0.09 + 1.44 + 0.49) + pot;
        assert!((t[0][0] - t00).abs() < 1e-14);
        for mu in 0..3 {
            for nu in 0..3 {
                assert_eq!(t[mu][nu], t[nu][mu]);
            }
        }
        // m^{μν}T_{μν} = -½∂^σφ∂_σφ - 3F in 2+1 dimensions
        let q = -0.09 + 1.44 + 0.49;
        let trace: f64 = (0..3).map(|m| METRIC[m] * t[m][m]).sum();
        assert!((trace - (-0.5 * q - 3.0 * pot)).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_boundary_current() {
        let n = [0.6, 0.8];
        let dn = 1.7;
        let dphi = [0.0, dn * n[0], dn * n[1]];
        let e = eval_x0_at(2.0, 0.9, 0.4, 3.0);
        let c = current_sample(&e, 0.0, dphi, 3.0);
        let jn = c.j[1] * n[0] + c.j[2] * n[1];
        let xn = e.x1 * n[0] + e.x2 * n[1];
        assert!((jn - 0.5 * xn * dn * dn).abs() < 1e-14);
    }

    #[test]
    fn linear_in_x_without_chi() {
        let t = energy_momentum([0.4, 1.1, -0.3], 0.8, 3.5);
        let xa = [1.0, 2.0, -0.5];
        let xb = [0.3, -1.0, 2.0];
        let sum = [1.3, 1.0, 1.5];
        let ja = current(&t, xa, 0.0, [0.0; 3], 0.8, [0.4, 1.1, -0.3]);
        let jb = current(&t, xb, 0.0, [0.0; 3], 0.8, [0.4, 1.1, -0.3]);
        let js = current(&t, sum, 0.0, [0.0; 3], 0.8, [0.4, 1.1, -0.3]);
        for k in 0..3 {
            assert!((js[k] - ja[k] - jb[k]).abs() < 1e-14);
        }
        assert_eq!(current(&t, [0.0; 3], 0.0, [0.0; 3], 0.8, [0.4, 1.1, -0.3]), [0.0; 3]);
    }

    #[test]
    fn conformal_field_values() {
        assert_eq!(eval_x0(0.0, 3.0, 3.0).xr, 0.0);
        let e = eval_x0(1.0, 2.0, 3.0);
        assert_eq!((e.xt, e.xr, e.chi), (6.0, 4.0, 1.0));
        assert_eq!(eval_x0(1.7, 2.0, 5.0).div_closed_form, 0.0);
    }

    #[test]
    fn tilde_fields_by_hand() {
        let e = eval_x1(2.0, 1.0, 1.0, 3.0);
        assert_eq!((e.xt, e.x1, e.x2, e.chi), (3.0, 0.0, 2.0, 1.0));
        assert!((e.div_closed_form + 0.5).abs() < 1e-15);
        let e = eval_x1(1.5, 1.5, 2.0, 3.0);
        assert_eq!((e.xt, e.x1, e.x2, e.div_closed_form), (5.0, 4.0, 0.0, 0.0));
        assert_eq!(eval_x1(0.3, -2.0, 1.0, 5.0).div_closed_form, 0.0);

        let e = eval_x2(1.0, 1.0, 0.0, 3.0).unwrap();
        assert_eq!((e.xt, e.x1, e.x2), (1.0, -1.0, 0.0));
        let e = eval_x2(1.0, 0.0, 1.0, 3.0).unwrap();
        assert!((e.xt - 2.5).abs() < 1e-15);
        assert!((e.x1 + 1.5).abs() < 1e-15);
        assert!((e.x2 - 2.0).abs() < 1e-15);
        assert!((e.chi - 1.0).abs() < 1e-15);
        assert!(matches!(eval_x2(0.0, 1.0, 0.0, 3.0), Err(Error::DomainViolation(_))));
        assert_eq!(eval_x2(3.0, 0.5, 1.0, 5.0).unwrap().div_closed_form, 0.0);
    }

    #[test]
    fn mixed_tie_goes_to_first_branch() {
        let e = eval_mixed(1.0, 1.0, 0.5, 3.0).unwrap();
        let f = eval_x1(1.0, 1.0, 0.5, 3.0);
        assert_eq!(e.xt, 4.0 * f.xt);
        assert_eq!(e.field_id, FieldId::Mixed);
        let g = eval_mixed(1.0 + 1e-12, 1.0, 0.5, 3.0).unwrap();
        assert!((g.xt - eval_x2(1.0 + 1e-12, 1.0, 0.5, 3.0).unwrap().xt).abs() < 1e-14);
    }

    fn potential(phi: f64, p: f64) -> f64 {
        phi.abs().powf(p + 1.0) / (p + 1.0)
    }

    proptest! {
        #[test]
        fn t00_nonnegative(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, phi in -3.0f64..3.0, p in 1.1f64..7.0) {
            prop_assert!(energy_momentum([a, b, c], phi, p)[0][0] >= 0.0);
        }

        #[test]
        fn dominance_on_diagonal(
            x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, phi in -2.0f64..2.0,
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, p in 1.5f64..5.0,
        ) {
            let t = x1;
            let dphi = [a, b, c];
            let tensor = energy_momentum(dphi, phi, p);
            let contract = |x: [f64; 3]| {
                let j = current(&tensor, x, 0.0, [0.0; 3], phi, dphi);
                j[0] + j[1]
            };
            let j1 = contract(eval_x1(t, x1, x2, p).vector());
            let j2 = contract(eval_x2(t, x1, x2, p).unwrap().vector());
            let f = potential(phi, p);
            let j1_ref = (x2 * x2 + 0.5) * (a + b).powi(2) + 0.5 * c * c + f;
            let j2_ref = (x2 * (a + b) + c).powi(2) + 2.0 * f;
            prop_assert!((j1 - j1_ref).abs() < 1e-9 * (1.0 + j1_ref.abs()));
            prop_assert!((j2 - j2_ref).abs() < 1e-9 * (1.0 + j2_ref.abs()));
            prop_assert!(j2 <= 4.0 * j1 + 1e-9 * (1.0 + j1.abs()));
        }

        #[test]
        fn template_signs(t in -5.0f64..5.0, x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, p in 1.5f64..8.0) {
            let d1 = eval_x1(t, x1, x2, p).div_closed_form;
            if p < 5.0 {
                prop_assert_eq!(d1 > 0.0, x1 > t);
                prop_assert_eq!(d1 < 0.0, x1 < t);
            }
            if let Ok(e) = eval_x2(t, x1, x2, p) {
                if p <= 5.0 { prop_assert!(e.div_closed_form >= 0.0); }
                else { prop_assert!(e.div_closed_form <= 0.0); }
            }
        }
    }
}
