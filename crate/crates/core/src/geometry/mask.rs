use serde::{Deserialize, Serialize};

use super::profile::ObstacleProfile;
use crate::error::{Error, Result};

/// Largest CFL number for which the 5-point leapfrog scheme is stable.
pub const CFL_LIMIT: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Uniform square grid `[-L, L]²` with spacing `h` and time step `dt = λh`.
///
/// Nodes sit at `-L + ih`, `i = 0..n`; `L` is always a multiple of `h`, so the
/// origin is a node and grids with spacings `h, h/2, ...` are nested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub h: f64,
    pub half_width: f64,
    pub dt: f64,
    pub lambda: f64,
    pub n: usize,
}

impl GridSpec {
    /// Grid with half-width rounded up to a multiple of `h`.
    pub fn new(h: f64, half_width: f64, lambda: f64) -> Result<Self> {
        if !(h > 0.0) || !(half_width > 0.0) || !h.is_finite() {
            return Err(Error::BadGrid(format!("h = {h}, L = {half_width}")));
        }
        if !(lambda > 0.0) {
            return Err(Error::BadGrid(format!("lambda = {lambda}")));
        }
        if lambda > CFL_LIMIT {
            return Err(Error::CflViolation { lambda });
        }
        let cells = (half_width / h - 1e-9).ceil().max(1.0) as usize;
        let half_width = cells as f64 * h;
        Ok(Self {
            h,
            half_width,
            dt: lambda * h,
            lambda,
            n: 2 * cells + 1,
        })
    }

    /// Grid just large enough that data supported in `B_support` cannot reach
    /// the box edge before `horizon`: `L ≥ support + horizon + 2h`.
    pub fn sized_for(h: f64, lambda: f64, support: f64, horizon: f64) -> Result<Self> {
        Self::new(h, support + horizon + 2.0 * h, lambda)
    }

    /// Same box, spacing divided by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.h / factor as f64, self.half_width, self.lambda)
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + self.h * i as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Cell area `h²` used by every node-sum quadrature.
    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    #[inline]
    pub fn on_frame(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.n || j + 1 == self.n
    }

    /// Nearest node index to coordinate `x` (clamped).
    pub fn nearest(&self, x: f64) -> usize {
        let k = ((x + self.half_width) / self.h).round();
        k.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum NodeClass {
    Exterior,
    Obstacle,
}

/// Exterior node with at least one obstacle 4-neighbour.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryNode {
    pub index: usize,
    pub theta: f64,
    /// Outward normal of `∂K` at the node's polar angle.
    pub normal: [f64; 2],
}

/// Node classification plus the per-row runs of updatable nodes.
#[derive(Debug, Clone)]
pub struct Mask {
    class: Vec<NodeClass>,
    obstacle: Vec<usize>,
    boundary: Vec<BoundaryNode>,
    /// For each row `j`, half-open `[i0, i1)` runs of exterior non-frame nodes.
    runs: Vec<Vec<(usize, usize)>>,
}

/// Classifies every node: `OBSTACLE` iff `|x| ≤ ρ(arg x)` (ties included).
pub fn build_mask(profile: Option<&ObstacleProfile>, grid: &GridSpec) -> Result<Mask> {
    if let Some(p) = profile {
        if grid.half_width < p.r_outer() + 2.0 * grid.h {
            return Err(Error::GridTooSmall {
                half_width: grid.half_width,
                r_outer: p.r_outer(),
            });
        }
    }
    let n = grid.n;
    let mut class = vec![NodeClass::Exterior; grid.len()];
    let mut obstacle = Vec::new();
    if let Some(p) = profile {
        let reach = p.r_outer();
        let lo = grid.nearest(-reach).saturating_sub(1);
        let hi = (grid.nearest(reach) + 1).min(n - 1);
        for j in lo..=hi {
            let y = grid.coord(j);
            for i in lo..=hi {
                let x = grid.coord(i);
                if p.contains(x, y) {
                    let k = grid.index(i, j);
                    class[k] = NodeClass::Obstacle;
                    obstacle.push(k);
                }
            }
        }
    }

    let mut boundary = Vec::new();
    let mut runs = Vec::with_capacity(n);
    for j in 0..n {
        let mut row = Vec::new();
        let mut start = None;
        for i in 0..n {
            let k = grid.index(i, j);
            let active = !grid.on_frame(i, j) && class[k] == NodeClass::Exterior;
            match (active, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    row.push((s, i));
                    start = None;
                }
                _ => {}
            }
            if active {
                let touches = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
                    .iter()
                    .any(|&(a, b)| class[grid.index(a, b)] == NodeClass::Obstacle);
                if touches {
                    let (x, y) = (grid.coord(i), grid.coord(j));
                    let theta = y.atan2(x);
                    let normal = profile
                        .map(|p| p.boundary_normal(theta))
                        .unwrap_or([theta.cos(), theta.sin()]);
                    boundary.push(BoundaryNode {
                        index: k,
                        theta,
                        normal,
                    });
                }
            }
        }
        if let Some(s) = start {
            row.push((s, n));
        }
        runs.push(row);
    }
    Ok(Mask {
        class,
        obstacle,
        boundary,
        runs,
    })
}

impl Mask {
    #[inline]
    pub fn class(&self, k: usize) -> NodeClass {
        self.class[k]
    }

    #[inline]
    pub fn is_exterior(&self, k: usize) -> bool {
        self.class[k] == NodeClass::Exterior
    }

    pub fn obstacle_nodes(&self) -> &[usize] {
        &self.obstacle
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    /// Runs of updatable nodes in row `j`.
    pub fn row_runs(&self, j: usize) -> &[(usize, usize)] {
        &self.runs[j]
    }

    pub fn active_count(&self) -> usize {
        self.runs
            .iter()
            .flat_map(|r| r.iter())
            .map(|(a, b)| b - a)
            .sum()
    }
}
