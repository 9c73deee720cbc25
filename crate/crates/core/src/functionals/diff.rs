use rayon::prelude::*;

use crate::geometry::Domain;

/// First derivatives at every exterior node. Centered where both neighbours
/// are exterior, second-order one-sided next to the obstacle or the frame.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

#[inline]
fn usable(domain: &Domain, i: isize, j: isize) -> bool {
    let n = domain.grid.n as isize;
    i >= 0 && j >= 0 && i < n && j < n && domain.mask.is_exterior((j * n + i) as usize)
}

/// Derivative along one axis at node `(i, j)`, stepping by `(di, dj)`.
#[inline]
fn axis_derivative(domain: &Domain, f: &[f64], i: usize, j: usize, di: isize, dj: isize) -> f64 {
    let g = &domain.grid;
    let n = g.n as isize;
    let (i, j) = (i as isize, j as isize);
    let at = |s: isize| f[((j + s * dj) * n + i + s * di) as usize];
    let ok = |s: isize| usable(domain, i + s * di, j + s * dj);
    let inv = 1.0 / g.h;
    match (ok(-1), ok(1)) {
        (true, true) => 0.5 * (at(1) - at(-1)) * inv,
        (false, true) if ok(2) => (-3.0 * at(0) + 4.0 * at(1) - at(2)) * 0.5 * inv,
        (false, true) => (at(1) - at(0)) * inv,
        (true, false) if ok(-2) => (3.0 * at(0) - 4.0 * at(-1) + at(-2)) * 0.5 * inv,
        (true, false) => (at(0) - at(-1)) * inv,
        (false, false) => 0.0,
    }
}

pub fn gradient(domain: &Domain, f: &[f64]) -> Gradient {
    let n = domain.grid.n;
    let mut dx = vec![0.0; f.len()];
    let mut dy = vec![0.0; f.len()];
    dx.par_chunks_mut(n)
        .zip(dy.par_chunks_mut(n))
        .enumerate()
        .for_each(|(j, (rx, ry))| {
            for i in 0..n {
                if domain.mask.is_exterior(j * n + i) {
                    rx[i] = axis_derivative(domain, f, i, j, 1, 0);
                    ry[i] = axis_derivative(domain, f, i, j, 0, 1);
                }
            }
        });
    Gradient { dx, dy }
}

/// Second derivatives `(φxx, φxy, φyy)` as derivatives of the gradient.
pub fn hessian(domain: &Domain, f: &[f64]) -> [Vec<f64>; 3] {
    let g = gradient(domain, f);
    let gx = gradient(domain, &g.dx);
    let gy = gradient(domain, &g.dy);
    let xy = gx
        .dy
        .iter()
        .zip(&gy.dx)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    [gx.dx, xy, gy.dy]
}

/// `Σ (f_a - f_b)² w_ab` over all grid edges, where `w_ab` is `weight` at
/// the edge midpoint. With `w ≡ 1` this is `h² fᵀ(-Δ_h)f` for the solver's
/// Laplacian, since inactive nodes hold zero.
pub fn edge_energy(domain: &Domain, f: &[f64], weight: Option<&(dyn Fn(f64, f64) -> f64 + Sync)>) -> f64 {
    let g = &domain.grid;
    let n = g.n;
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let y = g.coord(j);
            let mut s = 0.0;
            for i in 0..n {
                let k = j * n + i;
                let x = g.coord(i);
                if i + 1 < n {
                    let d = f[k + 1] - f[k];
                    if d != 0.0 {
                        s += d * d * weight.map_or(1.0, |w| w(x + 0.5 * g.h, y));
                    }
                }
                if j + 1 < n {
                    let d = f[k + n] - f[k];
                    if d != 0.0 {
                        s += d * d * weight.map_or(1.0, |w| w(x, y + 0.5 * g.h));
                    }
                }
            }
            s
        })
        .collect();
    rows.iter().sum()
}

/// `Σ (f_a - f_b)(g_a - g_b)` over all grid edges.
pub fn edge_product(domain: &Domain, f: &[f64], g: &[f64]) -> f64 {
    let n = domain.grid.n;
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut s = 0.0;
            for i in 0..n {
                let k = j * n + i;
                if i + 1 < n {
                    s += (f[k + 1] - f[k]) * (g[k + 1] - g[k]);
                }
                if j + 1 < n {
                    s += (f[k + n] - f[k]) * (g[k + n] - g[k]);
                }
            }
            s
        })
        .collect();
    rows.iter().sum()
}

/// `Σ_k h² g(k, x, y)` over exterior nodes, summed row by row in a fixed order.
pub fn node_sum(domain: &Domain, g: impl Fn(usize, f64, f64) -> f64 + Sync) -> f64 {
    let grid = &domain.grid;
    let n = grid.n;
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let y = grid.coord(j);
            let mut s = 0.0;
            for i in 0..n {
                let k = j * n + i;
                if domain.mask.is_exterior(k) {
                    s += g(k, grid.coord(i), y);
                }
            }
            s
        })
        .collect();
    rows.iter().sum::<f64>() * grid.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_profile, GridSpec, ProfileSpec};
    use std::sync::Arc;

    fn sample(d: &Arc<Domain>, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let g = &d.grid;
        let mut v = vec![0.0; g.len()];
        for j in 0..g.n {
            for i in 0..g.n {
                v[g.index(i, j)] = f(g.coord(i), g.coord(j));
            }
        }
        v
    }

    #[test]
    fn exact_on_quadratics() {
        let disk = build_profile(&ProfileSpec::disk(1.0)).unwrap();
        let d = Domain::new(GridSpec::new(0.1, 3.0, 0.5).unwrap(), Some(disk)).unwrap();
        let f = sample(&d, |x, y| x * x - 3.0 * x * y + 2.0 * y + 1.0);
        let gr = gradient(&d, &f);
        let g = &d.grid;
        for j in 0..g.n {
            for i in 0..g.n {
                let k = g.index(i, j);
                if !d.mask.is_exterior(k) {
                    continue;
                }
                let (x, y) = (g.coord(i), g.coord(j));
                // skip the rare nodes with a single usable neighbour
                let one_sided_first = [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
                    .iter()
                    .any(|&(a, b)| {
                        !usable(&d, i as isize + a, j as isize + b)
                            && !usable(&d, i as isize - 2 * a, j as isize - 2 * b)
                    });
                if one_sided_first {
                    continue;
                }
                assert!((gr.dx[k] - (2.0 * x - 3.0 * y)).abs() < 1e-10);
                assert!((gr.dy[k] - (-3.0 * x + 2.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn edge_energy_is_laplacian_form() {
        let d = Domain::new(GridSpec::new(0.2, 2.0, 0.5).unwrap(), None).unwrap();
        let g = &d.grid;
        let mut f = sample(&d, |x, y| (x * 1.3).sin() * (y - 0.2).cos());
        for j in 0..g.n {
            for i in 0..g.n {
                if g.on_frame(i, j) {
                    f[g.index(i, j)] = 0.0;
                }
            }
        }
        let mut lap = vec![0.0; f.len()];
        crate::solver::laplacian(&d, &f, &mut lap);
        let quad: f64 = -f.iter().zip(&lap).map(|(a, b)| a * b).sum::<f64>() * g.h * g.h;
        let e = edge_energy(&d, &f, None);
        assert!((e - quad).abs() < 1e-10 * quad);
    }
}
