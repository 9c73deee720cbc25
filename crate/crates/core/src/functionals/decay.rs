use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-log least-squares fit `log v ≈ intercept + slope·log t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    #[serde(rename = "r2")]
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Fits the points of `series` with `t` inside `window` (inclusive).
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData(pts.len()));
    }
    if pts.iter().any(|(t, v)| !(*v > 0.0) || !(*t > 0.0)) {
        return Err(Error::NonPositiveValues);
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(DecayFit {
        slope,
        intercept,
        r_squared,
        window,
    })
}

/// Ordinary least squares `y ≈ a + b x`, returning `(b, a, r²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    // a constant series is fitted exactly
    let r2 = if syy <= 1e-300 {
        1.0
    } else {
        let sse: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    (slope, intercept, r2)
}

/// Default fit window `[10, 0.8·T_final]`.
pub fn default_window(t_final: f64) -> (f64, f64) {
    (10.0, 0.8 * t_final)
}

/// Time series of one named functional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl EnergySeries {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, v: f64) {
        self.points.push((t, v));
    }

    pub fn max_over(&self, t0: f64, t1: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|(t, _)| *t >= t0 && *t <= t1)
            .map(|p| p.1)
            .reduce(f64::max)
    }

    pub fn fit(&self, window: (f64, f64)) -> Result<DecayFit> {
        fit_decay(&self.points, window)
    }
}

/// Writes `t,name,value` rows (with header) for every series.
pub fn write_series_csv<W: Write>(mut w: W, series: &[EnergySeries]) -> Result<()> {
    writeln!(w, "t,name,value")?;
    for s in series {
        for (t, v) in &s.points {
            writeln!(w, "{t},{},{v:e}", s.name)?;
        }
    }
    Ok(())
}
