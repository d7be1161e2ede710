use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{Connectivity, GridPose, OccupancyGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("path has no waypoints")]
    EmptyPath,
}

/// Ordered waypoint list. The first waypoint is the start; on success the
/// last one is the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub waypoints: Vec<GridPose>,
    /// Meters per cell, copied from the planning grid.
    pub resolution: f64,
}

impl PlannedPath {
    pub fn new(waypoints: Vec<GridPose>, resolution: f64) -> Self {
        PlannedPath { waypoints, resolution }
    }

    pub fn start(&self) -> Option<GridPose> {
        self.waypoints.first().copied()
    }

    pub fn end(&self) -> Option<GridPose> {
        self.waypoints.last().copied()
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Number of moves, i.e. waypoints minus one.
    pub fn steps(&self) -> usize {
        self.waypoints.len().saturating_sub(1)
    }

    /// Sum of Euclidean segment lengths in meters.
    pub fn length(&self) -> Result<f64, PathError> {
        path_length(self)
    }

    /// Checks that every waypoint is a Free cell and consecutive waypoints
    /// are neighbors under `connectivity`. Returns the index of the first
    /// offending waypoint.
    pub fn first_invalid(&self, grid: &OccupancyGrid, connectivity: Connectivity) -> Option<usize> {
        for (i, &w) in self.waypoints.iter().enumerate() {
            if !grid.is_free(w) {
                return Some(i);
            }
            if i > 0 && !is_step(self.waypoints[i - 1], w, grid, connectivity) {
                return Some(i);
            }
        }
        None
    }

    pub fn is_valid(&self, grid: &OccupancyGrid, connectivity: Connectivity) -> bool {
        self.first_invalid(grid, connectivity).is_none()
    }

    /// Grid-cell step count under unit cardinal / sqrt(2) diagonal costs.
    pub fn cell_cost(&self) -> f64 {
        self.waypoints.windows(2).fold(0.0, |acc, w| acc + w[0].euclidean(w[1]))
    }
}

fn is_step(a: GridPose, b: GridPose, grid: &OccupancyGrid, connectivity: Connectivity) -> bool {
    let dx = a.x.abs_diff(b.x);
    let dy = a.y.abs_diff(b.y);
    match (dx, dy) {
        (1, 0) | (0, 1) => true,
        (1, 1) if connectivity == Connectivity::Eight => grid
            .neighbors(a, Connectivity::Eight)
            .map(|n| n.contains(&b))
            .unwrap_or(false),
        _ => false,
    }
}

/// Path length in meters: Euclidean distance between consecutive waypoints
/// scaled by the grid resolution.
pub fn path_length(path: &PlannedPath) -> Result<f64, PathError> {
    if path.waypoints.is_empty() {
        return Err(PathError::EmptyPath);
    }
    Ok(path.cell_cost() * path.resolution)
}
