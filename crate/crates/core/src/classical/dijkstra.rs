//! Exhaustive uniform-cost search used as an optimality oracle in tests.
//!
//! Expands moves with its own offset tables instead of going through
//! `OccupancyGrid::neighbors`, so that a bug in the shared neighbor query
//! cannot hide in both this oracle and the planner it checks.

use std::collections::BTreeMap;

use super::astar::{check_endpoint, SearchError};
use crate::gridmap::{CellState, Connectivity, GridPose, OccupancyGrid};

/// Cost in cell units, or `None` when the goal is unreachable.
pub fn dijkstra_oracle(
    grid: &OccupancyGrid,
    start: GridPose,
    goal: GridPose,
    connectivity: Connectivity,
) -> Result<Option<f64>, SearchError> {
    check_endpoint(grid, start)?;
    check_endpoint(grid, goal)?;
    let free = |p: GridPose| grid.get(p) == Some(CellState::Free);
    let occupied = |p: GridPose| grid.get(p) == Some(CellState::Occupied);

    let mut moves: Vec<(i32, i32, f64)> = vec![(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0)];
    if connectivity == Connectivity::Eight {
        let d = 2f64.sqrt();
        moves.extend([(1, 1, d), (1, -1, d), (-1, 1, d), (-1, -1, d)]);
    }

    let mut best: BTreeMap<GridPose, f64> = BTreeMap::new();
    // frontier keyed by (cost bits, pose); non-negative f64 bit patterns order like the values
    let mut frontier: BTreeMap<(u64, GridPose), ()> = BTreeMap::new();
    best.insert(start, 0.0);
    frontier.insert((0f64.to_bits(), start), ());

    while let Some(((bits, here), ())) = frontier.pop_first() {
        let cost = f64::from_bits(bits);
        if best.get(&here).is_some_and(|&c| c < cost) {
            continue;
        }
        if here == goal {
            return Ok(Some(cost));
        }
        for &(dx, dy, step) in &moves {
            let next = GridPose::new(here.x + dx, here.y + dy);
            if !free(next) {
                continue;
            }
            if dx != 0
                && dy != 0
                && occupied(GridPose::new(here.x + dx, here.y))
                && occupied(GridPose::new(here.x, here.y + dy))
            {
                continue;
            }
            let c = cost + step;
            if best.get(&next).is_none_or(|&old| c < old) {
                best.insert(next, c);
                frontier.insert((c.to_bits(), next), ());
            }
        }
    }
    Ok(None)
}
