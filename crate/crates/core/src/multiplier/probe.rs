use serde::{Deserialize, Serialize};

use super::fields::{eval_x0_at, eval_x1, eval_x2};
use super::spherical::SphericalTable;

/// Multipliers that can be checked against computed solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiplierField {
    /// `X = ∂t`, `χ = 0`.
    Dt,
    X0,
    X1tilde,
    X2tilde,
    /// Angular average of the mixed field at shifted time `t + r_shift`.
    Spherical { r_shift: f64 },
}

impl MultiplierField {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Dt => "dt",
            Self::X0 => "x0",
            Self::X1tilde => "x1tilde",
            Self::X2tilde => "x2tilde",
            Self::Spherical { .. } => "spherical",
        }
    }

    /// Radial fields, for which the boundary term only needs `X^t`, `X^r`.
    pub fn is_radial(&self) -> bool {
        matches!(self, Self::Dt | Self::X0 | Self::Spherical { .. })
    }
}

/// `(X^μ, χ, ∂χ)` at a point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Local {
    pub x: [f64; 3],
    pub chi: f64,
    pub dchi: [f64; 3],
}

/// A field frozen at one time, with the spherical table built if needed.
pub(crate) struct FieldSlice {
    field: MultiplierField,
    t: f64,
    p: f64,
    table: Option<SphericalTable>,
}

pub(crate) const TABLE_QUAD: usize = 256;

impl FieldSlice {
    pub fn new(field: MultiplierField, t: f64, p: f64, r_max: f64, h: f64) -> Self {
        let table = match field {
            MultiplierField::Spherical { r_shift } => {
                Some(SphericalTable::build(t, p, r_shift, r_max, 0.25 * h, TABLE_QUAD))
            }
            _ => None,
        };
        Self { field, t, p, table }
    }

    pub fn local(&self, x: f64, y: f64) -> Option<Local> {
        let (t, p) = (self.t, self.p);
        match self.field {
            MultiplierField::Dt => Some(Local {
                x: [1.0, 0.0, 0.0],
                chi: 0.0,
                dchi: [0.0; 3],
            }),
            MultiplierField::X0 => {
                let e = eval_x0_at(t, x, y, p);
                Some(Local { x: e.vector(), chi: e.chi, dchi: e.dchi })
            }
            MultiplierField::X1tilde => {
                let e = eval_x1(t, x, y, p);
                Some(Local { x: e.vector(), chi: e.chi, dchi: e.dchi })
            }
            MultiplierField::X2tilde => eval_x2(t, x, y, p).ok().map(|e| Local {
                x: e.vector(),
                chi: e.chi,
                dchi: e.dchi,
            }),
            MultiplierField::Spherical { .. } => {
                let r = x.hypot(y);
                let s = self.table.as_ref()?.sample(r)?;
                let (cx, cy) = if r > 0.0 { (x / r, y / r) } else { (0.0, 0.0) };
                Some(Local {
                    x: [s.xt, s.xr * cx, s.xr * cy],
                    chi: s.chi,
                    dchi: [s.chi_t, s.chi_r * cx, s.chi_r * cy],
                })
            }
        }
    }

    /// Closed-form `∂^μJ_μ` for a solution, `None` outside the field's domain.
    pub fn closed_div(&self, x: f64, y: f64, phi: f64, dphi: [f64; 3]) -> Option<f64> {
        let (t, p) = (self.t, self.p);
        match self.field {
            MultiplierField::Dt => Some(0.0),
            MultiplierField::X0 => Some(eval_x0_at(t, x, y, p).divergence(phi, dphi, p)),
            MultiplierField::X1tilde => Some(eval_x1(t, x, y, p).divergence(phi, dphi, p)),
            MultiplierField::X2tilde => eval_x2(t, x, y, p).ok().map(|e| e.divergence(phi, dphi, p)),
            MultiplierField::Spherical { .. } => {
                let r = x.hypot(y);
                let s = self.table.as_ref()?.sample(r)?;
                let (cx, cy) = if r > 0.0 { (x / r, y / r) } else { (1.0, 0.0) };
                let v = [
                    dphi[0],
                    cx * dphi[1] + cy * dphi[2],
                    -cy * dphi[1] + cx * dphi[2],
                ];
                Some(s.bulk(v))
            }
        }
    }
}
