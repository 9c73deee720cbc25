//! Trapezoid rules with doubling-based error certificates.
//!
//! Periodic integrands over a full period converge spectrally under the plain
//! trapezoid rule, so a single doubling is a reliable error estimate. Smooth
//! non-periodic integrands go through Romberg extrapolation.

use std::f64::consts::PI;

/// Trapezoid rule for a `2π`-periodic integrand on `n` equispaced nodes
/// `θ_k = offset + 2πk/n`.
pub fn periodic_trapezoid<F: FnMut(f64) -> f64>(n: usize, offset: f64, mut f: F) -> f64 {
    let step = 2.0 * PI / n as f64;
    let mut acc = 0.0;
    for k in 0..n {
        acc += f(offset + step * k as f64);
    }
    acc * step
}

/// Periodic trapezoid at `n` and `2n` nodes; returns the refined value and the
/// absolute change between the two.
pub fn periodic_trapezoid_doubled<F: FnMut(f64) -> f64>(n: usize, mut f: F) -> (f64, f64) {
    let step = 2.0 * PI / (2 * n) as f64;
    let mut even = 0.0;
    let mut odd = 0.0;
    for k in 0..2 * n {
        let v = f(step * k as f64);
        if k % 2 == 0 {
            even += v;
        } else {
            odd += v;
        }
    }
    let coarse = even * 2.0 * step;
    let fine = (even + odd) * step;
    (fine, (fine - coarse).abs())
}

/// Result of a Romberg integration.
#[derive(Debug, Clone, Copy)]
pub struct Romberg {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Romberg integration of `f` over `[a, b]`.
///
/// Stops when two successive diagonal entries agree to
/// `max(abs_tol, rel_tol * |value|)` or after `max_levels` halvings.
pub fn romberg<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_levels: usize,
    mut f: F,
) -> Romberg {
    let width = b - a;
    if width == 0.0 {
        return Romberg {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        };
    }
    let mut prev_row: Vec<f64> = Vec::with_capacity(max_levels + 1);
    let mut trap = 0.5 * width * (f(a) + f(b));
    let mut evaluations = 2;
    prev_row.push(trap);
    let mut intervals = 1usize;
    let mut best = trap;
    let mut err = f64::INFINITY;

    for level in 1..=max_levels {
        let h = width / (2 * intervals) as f64;
        let mut mid = 0.0;
        for k in 0..intervals {
            mid += f(a + h * (2 * k + 1) as f64);
        }
        evaluations += intervals;
        trap = 0.5 * trap + h * mid;
        intervals *= 2;

        let mut row = Vec::with_capacity(level + 1);
        row.push(trap);
        let mut factor = 1.0;
        for j in 1..=level {
            factor *= 4.0;
            let r = row[j - 1] + (row[j - 1] - prev_row[j - 1]) / (factor - 1.0);
            row.push(r);
        }
        let diag = row[level];
        err = (diag - prev_row[level - 1]).abs();
        best = diag;
        // at least three levels so a lucky early agreement cannot stop it
        if level >= 3 && err <= abs_tol.max(rel_tol * diag.abs()) {
            break;
        }
        prev_row = row;
    }
    Romberg {
        value: best,
        error: err,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_trapezoid_is_spectral_for_smooth_integrands() {
        // ∫ e^{cos θ} dθ = 2π I0(1)
        let exact = 2.0 * PI * 1.266_065_877_752_008_4;
        let v = periodic_trapezoid(32, 0.0, |t| t.cos().exp());
        assert!((v - exact).abs() < 1e-13);
        let (fine, change) = periodic_trapezoid_doubled(16, |t| t.cos().exp());
        assert!((fine - exact).abs() < 1e-13);
        assert!(change < 1e-10);
    }

    #[test]
    fn romberg_polynomial_and_transcendental() {
        let r = romberg(0.0, 2.0, 1e-14, 0.0, 20, |x| x * x * x);
        assert!((r.value - 4.0).abs() < 1e-13);
        let r = romberg(0.0, PI / 2.0, 1e-13, 0.0, 20, |x| x.sin());
        assert!((r.value - 1.0).abs() < 1e-12, "{}", r.value);
        assert!(r.error < 1e-10);
    }

    #[test]
    fn romberg_empty_interval() {
        let r = romberg(1.0, 1.0, 1e-12, 0.0, 10, |x| x);
        assert_eq!(r.value, 0.0);
    }
}
