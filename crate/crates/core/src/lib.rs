//! Grid path planning with a stepwise planner that multiplies a
//! language-model task score by a map-derived affordance, next to A* and
//! RRT baselines, a tick-based simulator with dynamic obstacles, and a
//! benchmark harness.

pub mod bench;
pub mod classical;
pub mod cli;
pub mod gridmap;
pub mod grounded;
pub mod planner;
pub mod scorer;
pub mod simulator;
pub mod translator;
