use serde::Serialize;

use crate::error::{Error, Result};

/// Nonlinearity exponent and the derived thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub p: f64,
    /// `min{p, 5}`.
    pub p5: f64,
    /// Critical Sobolev index `(p-3)/(p-1)`.
    pub sp: f64,
    /// `2√5 - 1`: above it solutions scatter in the energy space.
    pub thresh_energy: f64,
    /// `1 + 2√2`: above it solutions scatter in the critical space.
    pub thresh_critical: f64,
    #[serde(skip)]
    int_p: Option<i32>,
}

pub fn make_exponents(p: f64) -> Result<Exponents> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::BadP { p });
    }
    let int_p = (p.fract() == 0.0 && p < 64.0).then_some(p as i32);
    Ok(Exponents {
        p,
        p5: p.min(5.0),
        sp: (p - 3.0) / (p - 1.0),
        thresh_energy: 2.0 * 5f64.sqrt() - 1.0,
        thresh_critical: 1.0 + 2.0 * 2f64.sqrt(),
        int_p,
    })
}

impl Exponents {
    pub fn energy_scattering(&self) -> bool {
        self.p > self.thresh_energy
    }

    pub fn critical_scattering(&self) -> bool {
        self.p > self.thresh_critical
    }

    /// `|φ|^q` with a fast path for integer `q`.
    #[inline]
    fn abs_pow(&self, phi: f64, offset: i32) -> f64 {
        match self.int_p {
            Some(p) => phi.abs().powi(p + offset),
            None => phi.abs().powf(self.p + offset as f64),
        }
    }

    /// Defocusing forcing `|φ|^{p-1} φ`.
    #[inline]
    pub fn nonlinearity(&self, phi: f64) -> f64 {
        self.abs_pow(phi, -1) * phi
    }

    /// `|φ|^{p+1}`.
    #[inline]
    pub fn abs_pow_p1(&self, phi: f64) -> f64 {
        self.abs_pow(phi, 1)
    }

    /// Potential energy density `|φ|^{p+1}/(p+1)`.
    #[inline]
    pub fn potential(&self, phi: f64) -> f64 {
        self.abs_pow_p1(phi) / (self.p + 1.0)
    }
}
