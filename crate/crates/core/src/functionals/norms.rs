use super::diff::node_sum;
use crate::error::{Error, Result};
use crate::geometry::Domain;

fn lebesgue(domain: &Domain, f: &[f64], q: f64, region: impl Fn(f64) -> bool + Sync) -> f64 {
    node_sum(domain, |k, x, y| {
        let v = f[k];
        if v != 0.0 && region(x.hypot(y)) {
            v.abs().powf(q)
        } else {
            0.0
        }
    })
    .powf(1.0 / q)
}

/// `‖f‖_{L^{2/(1-s)}(r<3R)} + ‖f‖_{L^h(r>2R)}` with `R` the obstacle radius.
/// The two regions overlap on `2R < r < 3R`.
pub fn xhs_norm(domain: &Domain, f: &[f64], h_exp: f64, s: f64) -> Result<f64> {
    if !(h_exp >= 1.0) || !h_exp.is_finite() {
        return Err(Error::BadExponent(format!("h = {h_exp}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::BadExponent(format!("s = {s}")));
    }
    let r = domain.r_outer();
    let near = lebesgue(domain, f, 2.0 / (1.0 - s), |rr| rr < 3.0 * r);
    let far = lebesgue(domain, f, h_exp, |rr| rr > 2.0 * r);
    Ok(near + far)
}

/// Exponent condition for the exterior Strichartz estimate: `(6, 6, 1/2)`, or
/// `q > h`, `1/q + 2/h = 1 - s` and `1/q + 1/(2h) < 1/4`. `q` may be infinite.
pub fn suitable_pair(q: f64, h_exp: f64, s: f64) -> bool {
    if q == 6.0 && h_exp == 6.0 && s == 0.5 {
        return true;
    }
    let iq = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let ih = 1.0 / h_exp;
    q > h_exp && (iq + 2.0 * ih - (1.0 - s)).abs() < 1e-12 && iq + 0.5 * ih < 0.25
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_profile, GridSpec, ProfileSpec};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn domain() -> Arc<Domain> {
        let disk = build_profile(&ProfileSpec::disk(1.0)).unwrap();
        Domain::new(GridSpec::new(0.1, 6.0, 0.5).unwrap(), Some(disk)).unwrap()
    }

    fn field(d: &Domain, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let g = &d.grid;
        (0..g.len())
            .map(|k| {
                let (i, j) = (k % g.n, k / g.n);
                if d.mask.is_exterior(k) {
                    f(g.coord(i), g.coord(j))
                } else {
                    0.0
                }
            })
            .collect()
    }

    #[test]
    fn suitability() {
        assert!(suitable_pair(6.0, 6.0, 0.5));
        let p = 4.0;
        let sp = (p - 3.0) / (p - 1.0);
        assert!(suitable_pair(f64::INFINITY, 2.0 * (p - 1.0) / (p - 3.0), 1.0 - sp));
        assert!(!suitable_pair(2.0, 100.0, 0.1));
    }

    #[test]
    fn zero_and_far_fields() {
        let d = domain();
        let z = vec![0.0; d.grid.len()];
        assert_eq!(xhs_norm(&d, &z, 6.0, 0.5).unwrap(), 0.0);
        let f = field(&d, |x, y| if x.hypot(y) > 3.5 { (x * y).sin() } else { 0.0 });
        let far = lebesgue(&d, &f, 6.0, |_| true);
        assert!((xhs_norm(&d, &f, 6.0, 0.5).unwrap() - far).abs() < 1e-14);
        assert!(matches!(xhs_norm(&d, &f, 0.5, 0.5), Err(Error::BadExponent(_))));
        assert!(xhs_norm(&d, &f, 6.0, 1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn is_a_norm(a in -3.0f64..3.0, b in 0.1f64..2.0, c in 0.1f64..2.0, lam in -5.0f64..5.0) {
            let d = domain();
            let f = field(&d, |x, y| (a * x + b * y).sin() * (-(x * x + y * y) / 8.0).exp());
            let g = field(&d, |x, y| (c * x * y).cos() * (-(x * x + y * y) / 4.0).exp());
            let nf = xhs_norm(&d, &f, 4.0, 0.3).unwrap();
            let ng = xhs_norm(&d, &g, 4.0, 0.3).unwrap();
            let sum: Vec<f64> = f.iter().zip(&g).map(|(u, v)| u + v).collect();
            prop_assert!(xhs_norm(&d, &sum, 4.0, 0.3).unwrap() <= (nf + ng) * (1.0 + 1e-12));
            let scaled: Vec<f64> = f.iter().map(|u| lam * u).collect();
            let ns = xhs_norm(&d, &scaled, 4.0, 0.3).unwrap();
            prop_assert!((ns - lam.abs() * nf).abs() <= 1e-12 * (1.0 + ns));
        }
    }
}
