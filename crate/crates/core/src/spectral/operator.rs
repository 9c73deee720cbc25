use std::io::Write;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use super::tridiag::eig_first_row;
use crate::error::{Error, Result};
use crate::geometry::Domain;

/// Above this many unknowns the spectral calculus switches from a dense
/// eigendecomposition to Lanczos.
pub const DENSE_MAX: usize = 1600;

/// Relative tolerance of Lanczos-based applications and norms.
pub const LANCZOS_TOL: f64 = 1e-8;

/// Eigenvalues below `NULL_CUTOFF·λ_max` are dropped from negative powers.
pub const NULL_CUTOFF: f64 = 1e-12;

const MAX_LANCZOS: usize = 20_000;

#[derive(Debug)]
struct Dense {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

/// Discrete Dirichlet Laplacian `-Δ_h` on active nodes, in CSR form.
#[derive(Debug)]
pub struct DirichletOperator {
    domain: Arc<Domain>,
    /// Grid index of every unknown.
    nodes: Vec<usize>,
    /// Unknown number of every grid node (`u32::MAX` when inactive).
    map: Vec<u32>,
    /// Unknown numbers of the (left, right, down, up) neighbours.
    stencil: Vec<[u32; 4]>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    dense: OnceLock<Dense>,
}

/// Builds the operator over exterior non-frame nodes. Obstacle and frame
/// nodes are Dirichlet and eliminated.
pub fn assemble(domain: &Arc<Domain>) -> Result<DirichletOperator> {
    let g = &domain.grid;
    let n = g.n;
    let mut nodes = Vec::new();
    let mut map = vec![u32::MAX; g.len()];
    for j in 0..n {
        for &(i0, i1) in domain.mask.row_runs(j) {
            for i in i0..i1 {
                let k = g.index(i, j);
                map[k] = nodes.len() as u32;
                nodes.push(k);
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::EmptyExterior);
    }
    let inv_h2 = 1.0 / (g.h * g.h);
    let mut row_ptr = Vec::with_capacity(nodes.len() + 1);
    let mut cols = Vec::with_capacity(5 * nodes.len());
    let mut vals = Vec::with_capacity(5 * nodes.len());
    let mut stencil = Vec::with_capacity(nodes.len());
    row_ptr.push(0);
    for &k in &nodes {
        stencil.push([map[k - 1], map[k + 1], map[k - n], map[k + n]]);
        let mut entries = vec![(map[k], 4.0 * inv_h2)];
        for nb in [k - n, k - 1, k + 1, k + n] {
            if map[nb] != u32::MAX {
                entries.push((map[nb], -inv_h2));
            }
        }
        entries.sort_by_key(|e| e.0);
        for (c, v) in entries {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    let op = DirichletOperator {
        domain: Arc::clone(domain),
        nodes,
        map,
        stencil,
        row_ptr,
        cols,
        vals,
        dense: OnceLock::new(),
    };
    let lmin = op.lambda_min_probe()?;
    if !(lmin > 0.0) {
        return Err(Error::ConvergenceFailure(format!(
            "operator not positive definite (probe {lmin})"
        )));
    }
    Ok(op)
}

impl DirichletOperator {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    /// Restriction of a grid field to the unknowns.
    pub fn restrict(&self, f: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&k| f[k]).collect()
    }

    /// Extension by zero of an unknown vector to the grid.
    pub fn extend(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.domain.grid.len()];
        for (&k, x) in self.nodes.iter().zip(v) {
            out[k] = *x;
        }
        out
    }

    /// Unknown index of grid node `k`, if active.
    pub fn unknown(&self, k: usize) -> Option<usize> {
        (self.map[k] != u32::MAX).then_some(self.map[k] as usize)
    }

    /// `y = A x`, evaluated with the same arithmetic as the solver stencil.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let h = self.domain.grid.h;
        let inv_h2 = 1.0 / (h * h);
        let at = |c: u32| if c == u32::MAX { 0.0 } else { x[c as usize] };
        for (r, out) in y.iter_mut().enumerate() {
            let [a, b, c, d] = self.stencil[r];
            *out = -((at(a) + at(b) + at(c) + at(d) - 4.0 * x[r]) * inv_h2);
        }
    }

    fn entry(&self, r: usize, c: usize) -> f64 {
        (self.row_ptr[r]..self.row_ptr[r + 1])
            .find(|&p| self.cols[p] as usize == c)
            .map_or(0.0, |p| self.vals[p])
    }

    fn dense(&self) -> &Dense {
        self.dense.get_or_init(|| {
            let n = self.dim();
            let m = DMatrix::from_fn(n, n, |i, j| self.entry(i, j));
            let SymmetricEigen {
                eigenvalues,
                eigenvectors,
            } = m.symmetric_eigen();
            Dense {
                values: eigenvalues.iter().copied().collect(),
                vectors: eigenvectors,
            }
        })
    }

    /// All eigenvalues in increasing order (dense path only).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.dim() > DENSE_MAX {
            return Err(Error::ConvergenceFailure(format!(
                "{} unknowns exceed the dense limit {DENSE_MAX}",
                self.dim()
            )));
        }
        let mut v = self.dense().values.clone();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// Smallest Ritz value after a short Lanczos run from a fixed start.
    fn lambda_min_probe(&self) -> Result<f64> {
        let start: Vec<f64> = (0..self.dim())
            .map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).fract())
            .collect();
        let steps = 30.min(self.dim());
        let (a, b) = self.lanczos(&start, steps, |_, _| false)?;
        let (vals, _) = eig_first_row(&a, &b)?;
        Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Plain Lanczos from `start`. `stop(α, β)` is called after every step
    /// and may end the run early. Returns the tridiagonal coefficients.
    fn lanczos(
        &self,
        start: &[f64],
        max_steps: usize,
        mut stop: impl FnMut(&[f64], &[f64]) -> bool,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.lanczos_vectors(start, max_steps, &mut stop, |_, _| {})
    }

    fn lanczos_vectors(
        &self,
        start: &[f64],
        max_steps: usize,
        stop: &mut dyn FnMut(&[f64], &[f64]) -> bool,
        mut visit: impl FnMut(usize, &[f64]),
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        let norm = start.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        if norm == 0.0 {
            return Ok((alpha, beta));
        }
        let mut v: Vec<f64> = start.iter().map(|x| x / norm).collect();
        let mut v_old = vec![0.0; n];
        let mut w = vec![0.0; n];
        let scale = 8.0 / self.domain.grid.h.powi(2);
        for step in 0..max_steps.min(n) {
            visit(step, &v);
            self.matvec(&v, &mut w);
            let b_prev = beta.last().copied().unwrap_or(0.0);
            let a: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
            for i in 0..n {
                w[i] -= a * v[i] + b_prev * v_old[i];
            }
            alpha.push(a);
            let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if stop(&alpha, &beta) || b <= 1e-13 * scale || step + 1 == max_steps.min(n) {
                break;
            }
            beta.push(b);
            for i in 0..n {
                v_old[i] = v[i];
                v[i] = w[i] / b;
            }
        }
        beta.truncate(alpha.len().saturating_sub(1));
        Ok((alpha, beta))
    }

    /// Gauss quadrature `e1ᵀ T^s e1 = Σ τ_i² θ_i^s`.
    fn quadrature(alpha: &[f64], beta: &[f64], s: f64, lmax: f64) -> Result<f64> {
        let (vals, first) = eig_first_row(alpha, beta)?;
        Ok(vals
            .iter()
            .zip(&first)
            .map(|(l, z)| z * z * spectral_power(*l, 2.0 * s, lmax))
            .sum())
    }

    /// `A^{s/2}f` for a grid field `f`, returned as a grid field.
    pub fn frac_apply(&self, f: &[f64], s: f64) -> Result<Vec<f64>> {
        check_power(s)?;
        let x = self.restrict(f);
        if s == 0.0 {
            return Ok(self.extend(&x));
        }
        if s == 2.0 {
            let mut y = vec![0.0; x.len()];
            self.matvec(&x, &mut y);
            return Ok(self.extend(&y));
        }
        let y = if self.dim() <= DENSE_MAX {
            let d = self.dense();
            let lmax = d.values.iter().copied().fold(0.0, f64::max);
            let xv = nalgebra::DVector::from_vec(x);
            let mut c = d.vectors.tr_mul(&xv);
            for (ci, l) in c.iter_mut().zip(&d.values) {
                *ci *= spectral_power(*l, s, lmax);
            }
            (&d.vectors * c).iter().copied().collect()
        } else {
            self.lanczos_apply(&x, s)?
        };
        Ok(self.extend(&y))
    }

    fn lanczos_apply(&self, x: &[f64], s: f64) -> Result<Vec<f64>> {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(vec![0.0; x.len()]);
        }
        // first pass: converge the quadratic form e1ᵀ T^s e1 (a proxy for the
        // coefficient vector) then form g(T)e1 once
        let (alpha, beta) = self.converged_coefficients(x, s)?;
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let lmax = self.lambda_max();
        let eig = t.symmetric_eigen();
        let coef: Vec<f64> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|k| {
                        eig.eigenvectors[(i, k)]
                            * spectral_power(eig.eigenvalues[k], s, lmax)
                            * eig.eigenvectors[(0, k)]
                    })
                    .sum::<f64>()
                    * norm
            })
            .collect();
        // second pass regenerates the same basis
        let mut y = vec![0.0; x.len()];
        let mut never = |_: &[f64], _: &[f64]| false;
        self.lanczos_vectors(x, m, &mut never, |step, v| {
            for (yi, vi) in y.iter_mut().zip(v) {
                *yi += coef[step] * vi;
            }
        })?;
        Ok(y)
    }

    fn lambda_max(&self) -> f64 {
        8.0 / self.domain.grid.h.powi(2)
    }

    fn converged_coefficients(&self, x: &[f64], s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let lmax = self.lambda_max();
        let mut last = f64::NAN;
        let mut streak = 0;
        let mut failure = None;
        let (alpha, beta) = self.lanczos(x, MAX_LANCZOS, |a, b| {
            if a.len() % 10 != 0 {
                return false;
            }
            match Self::quadrature(a, b, s, lmax) {
                Ok(q) => {
                    let rel = ((q - last) / q).abs();
                    last = q;
                    streak = if rel < 0.1 * LANCZOS_TOL { streak + 1 } else { 0 };
                    streak >= 2
                }
                Err(e) => {
                    failure = Some(e);
                    true
                }
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        if streak < 2 && alpha.len() >= MAX_LANCZOS {
            return Err(Error::ConvergenceFailure(format!(
                "Lanczos stagnated after {} steps",
                alpha.len()
            )));
        }
        Ok((alpha, beta))
    }

    /// `‖A^{s/2}f‖` in the `h`-weighted discrete `L²` norm.
    pub fn frac_norm(&self, f: &[f64], s: f64) -> Result<f64> {
        check_power(s)?;
        let h2 = self.domain.grid.cell_area();
        let x = self.restrict(f);
        let nx2: f64 = x.iter().map(|v| v * v).sum();
        if nx2 == 0.0 {
            return Ok(0.0);
        }
        if s == 0.0 {
            return Ok((nx2 * h2).sqrt());
        }
        if self.dim() <= DENSE_MAX || s == 2.0 {
            let y = self.frac_apply(f, s)?;
            return Ok((y.iter().map(|v| v * v).sum::<f64>() * h2).sqrt());
        }
        // Gauss quadrature: fᵀA^s f = ‖f‖² e1ᵀ T^s e1
        let (alpha, beta) = self.converged_coefficients(&x, s)?;
        let q = Self::quadrature(&alpha, &beta, s, self.lambda_max())?;
        Ok((nx2 * q.max(0.0) * h2).sqrt())
    }

    /// `‖f‖_{Ḣ^s} + ‖g‖_{Ḣ^{s-1}}`.
    pub fn pair_norm(&self, f: &[f64], g: &[f64], s: f64) -> Result<f64> {
        Ok(self.frac_norm(f, s)? + self.frac_norm(g, s - 1.0)?)
    }

    /// Coordinate-format dump: `row col value` per stored entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.dim(), self.dim(), self.vals.len())?;
        for r in 0..self.dim() {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                writeln!(w, "{} {} {:e}", r, self.cols[p], self.vals[p])?;
            }
        }
        Ok(())
    }
}

fn check_power(s: f64) -> Result<()> {
    if !(-2.0..=2.0).contains(&s) {
        return Err(Error::BadExponent(format!("fractional power s = {s}")));
    }
    Ok(())
}

/// `λ^{s/2}`, with eigenvalues at or below the null cutoff dropped for
/// negative powers.
fn spectral_power(l: f64, s: f64, lmax: f64) -> f64 {
    if s < 0.0 && l <= NULL_CUTOFF * lmax {
        0.0
    } else {
        l.max(0.0).powf(0.5 * s)
    }
}
