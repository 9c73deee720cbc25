//! Star-shaped obstacles, the computational grid and node classification.

mod mask;
mod profile;

use std::sync::Arc;

pub use mask::{build_mask, BoundaryNode, GridSpec, Mask, NodeClass, CFL_LIMIT};
pub use profile::{build_profile, BoundaryPoint, ObstacleProfile, ProfileKind, ProfileSpec};

use crate::error::Result;

/// Grid, mask and (optional) obstacle shared by every state of a run.
#[derive(Debug, Clone)]
pub struct Domain {
    pub grid: GridSpec,
    pub mask: Mask,
    pub profile: Option<ObstacleProfile>,
}

impl Domain {
    pub fn new(grid: GridSpec, profile: Option<ObstacleProfile>) -> Result<Arc<Self>> {
        let mask = build_mask(profile.as_ref(), &grid)?;
        Ok(Arc::new(Self {
            grid,
            mask,
            profile,
        }))
    }

    /// Obstacle radius `R` (`0` for free space).
    pub fn r_outer(&self) -> f64 {
        self.profile.as_ref().map_or(0.0, |p| p.r_outer())
    }

    /// Same obstacle on a grid with the given spacing and box.
    pub fn with_grid(&self, grid: GridSpec) -> Result<Arc<Self>> {
        Self::new(grid, self.profile.clone())
    }
}
