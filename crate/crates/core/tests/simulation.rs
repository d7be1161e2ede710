use std::path::Path;

use gridplan::bench::{aggregate, run_suite, PlannerSettings, Suite};
use gridplan::gridmap::{random_map, CellState, GridPose};
use gridplan::grounded::PlannerConfig;
use gridplan::planner::{AstarPlanner, GroundedPlanner, Planner, PlannerKind};
use gridplan::scorer::OracleScorer;
use gridplan::simulator::{execute, validate_external_path, world_at, DynamicObstacle, Scenario};
use proptest::prelude::*;

fn assets() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/assets"))
}

#[test]
fn bundled_scenarios_load_and_are_solvable() {
    let suite = Suite::load(&assets().join("suite.toml")).unwrap();
    assert_eq!(suite.scenarios.len(), 5);
    for s in &suite.scenarios {
        let rec = execute(s, &AstarPlanner::default()).unwrap();
        assert!(rec.reached_goal, "{}", s.id);
        assert_eq!(validate_external_path(s, &rec.visited), Ok(()), "{}", s.id);
    }
    let world = suite.scenarios.iter().find(|s| s.id == "room_a").unwrap();
    assert_eq!(
        (world.map.width(), world.map.height(), world.map.resolution()),
        (100, 100, 0.1)
    );
}

#[test]
fn oracle_grounded_matches_astar_length_per_trial() {
    let suite = Suite::load(&assets().join("suite.toml")).unwrap();
    let statics: Vec<Scenario> = suite
        .scenarios
        .into_iter()
        .filter(|s| s.dynamic_obstacles.is_empty())
        .collect();
    let planners = [PlannerKind::Astar, "grounded:oracle".parse().unwrap()];
    let out = run_suite(&statics, &planners, 1, 2, &PlannerSettings::default(), None).unwrap();
    for pair in out.rows.chunks(2) {
        assert!(pair[0].correct && pair[1].correct, "{}", pair[0].scenario_id);
        assert_eq!(pair[0].path_length_m, pair[1].path_length_m, "{}", pair[0].scenario_id);
    }
    // aggregation is a pure function of the rows
    assert_eq!(aggregate(&out.rows), out.report);
}

fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    (
        0u64..500,
        prop::collection::vec((0i32..12, 0i32..12, 0u32..20), 0..6),
        1u32..4,
    )
        .prop_filter_map("needs free endpoints", |(seed, obstacles, radius)| {
            let map = random_map(12, 12, 0.2, seed).ok()?;
            let free: Vec<GridPose> = map.poses().filter(|&p| map.is_free(p)).collect();
            let start = free[seed as usize % free.len()];
            let goal = free[(seed as usize * 7 + 3) % free.len()];
            let dynamic_obstacles = obstacles
                .into_iter()
                .map(|(x, y, t)| DynamicObstacle {
                    cell: GridPose::new(x, y),
                    appears_at_step: t,
                })
                .filter(|o| o.cell != start)
                .collect();
            Some(Scenario {
                dynamic_obstacles,
                sensing_radius: radius,
                ..Scenario::fixed("prop", map, start, goal)
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn execution_invariants(scenario in scenario_strategy()) {
        let planners: [Box<dyn Planner>; 2] = [
            Box::new(AstarPlanner::default()),
            Box::new(GroundedPlanner { scorer: OracleScorer, config: PlannerConfig::default() }),
        ];
        for planner in &planners {
            let rec = execute(&scenario, planner.as_ref()).unwrap();
            prop_assert_eq!(rec.visited[0], scenario.start);
            prop_assert!(!(rec.collided && rec.reached_goal));
            prop_assert_eq!(rec.steps_taken as usize + 1, rec.visited.len());
            for p in scenario.map.poses() {
                if scenario.map.get(p) == Some(CellState::Occupied) {
                    prop_assert_eq!(rec.working_map.get(p), Some(CellState::Occupied));
                }
            }
            if rec.reached_goal {
                prop_assert_eq!(validate_external_path(&scenario, &rec.visited), Ok(()));
                for (tick, cell) in rec.visited.iter().enumerate() {
                    prop_assert!(world_at(&scenario, tick as u32).is_free(*cell));
                }
            }
            let again = execute(&scenario, planner.as_ref()).unwrap();
            prop_assert_eq!(&again.visited, &rec.visited);
        }
    }
}
