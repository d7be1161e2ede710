use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gridplan(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridplan"))
        .args(args)
        .current_dir(cwd)
        .env_remove("API_KEY")
        .env_remove("GRIDPLAN_CONFIG")
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn write_map(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn plan_on_corridor_prints_waypoints() {
    let dir = tempfile::tempdir().unwrap();
    let map = write_map(dir.path(), "w.map", "5 1 1.0\n.....\n");
    let out = gridplan(
        &[
            "plan",
            "--map",
            &map,
            "--start",
            "0,0",
            "--goal",
            "4,0",
            "--planner",
            "astar",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert_eq!(
        stdout.lines().collect::<Vec<_>>(),
        ["(0,0)", "(1,0)", "(2,0)", "(3,0)", "(4,0)"]
    );
    assert!(text(&out.stderr).contains("length 4.000 m"));
}

#[test]
fn every_planner_family_runs_offline() {
    let dir = tempfile::tempdir().unwrap();
    let map = write_map(dir.path(), "w.map", "6 3 0.5\n......\n.####.\n......\n");
    for (planner, scorer) in [
        ("astar", "mock"),
        ("rrt", "mock"),
        ("grounded", "mock"),
        ("grounded", "oracle"),
        ("fullpath", "oracle"),
    ] {
        let out = gridplan(
            &[
                "plan",
                "--map",
                &map,
                "--start",
                "0,0",
                "--goal",
                "5,2",
                "--planner",
                planner,
                "--scorer",
                scorer,
                "--seed",
                "3",
            ],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{planner}/{scorer}: {}", text(&out.stderr));
        let lines: Vec<String> = text(&out.stdout).lines().map(String::from).collect();
        assert_eq!(lines.first().map(String::as_str), Some("(0,0)"));
        assert_eq!(lines.last().map(String::as_str), Some("(5,2)"));
    }
}

#[test]
fn unreachable_goal_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let map = write_map(dir.path(), "w.map", "3 1 1.0\n.#.\n");
    for planner in ["astar", "grounded"] {
        let out = gridplan(
            &[
                "plan",
                "--map",
                &map,
                "--start",
                "0,0",
                "--goal",
                "2,0",
                "--planner",
                planner,
            ],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(2), "{planner}");
        assert!(text(&out.stderr).contains("no path"), "{}", text(&out.stderr));
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let map = write_map(dir.path(), "w.map", "3 1 1.0\n...\n");
    let cases: Vec<Vec<&str>> = vec![
        vec!["plan", "--bogus"],
        vec!["plan", "--map", &map, "--start", "0;0", "--goal", "2,0"],
        vec!["plan", "--map", &map, "--start", "0,0", "--goal", "9,0"],
        vec!["plan", "--map", "missing.map", "--start", "0,0", "--goal", "2,0"],
        vec![
            "plan",
            "--map",
            &map,
            "--start",
            "0,0",
            "--goal",
            "2,0",
            "--planner",
            "dfs",
        ],
        vec![
            "plan",
            "--map",
            &map,
            "--start",
            "0,0",
            "--goal",
            "2,0",
            "--connectivity",
            "6",
        ],
        vec!["plan", "--map", &map, "--start", "0,0", "--goal", "2,0", "--tau", "0"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let out = gridplan(&args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", text(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    let out = gridplan(&["plan", "--bogus"], dir.path());
    assert!(text(&out.stderr).contains("Usage"));
}

#[test]
fn remote_scorer_requires_opt_in_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let map = write_map(dir.path(), "w.map", "3 1 1.0\n...\n");
    let base = [
        "plan",
        "--map",
        map.as_str(),
        "--start",
        "0,0",
        "--goal",
        "2,0",
        "--planner",
        "grounded",
        "--scorer",
        "remote",
    ];
    let out = gridplan(&base, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("--allow-network"), "{}", text(&out.stderr));
    let mut with_flag = base.to_vec();
    with_flag.push("--allow-network");
    let out = gridplan(&with_flag, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("API_KEY"), "{}", text(&out.stderr));
}

#[test]
fn plan_out_dir_holds_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let map = write_map(dir.path(), "w.map", "4 4 1.0\n....\n.##.\n....\n....\n");
    let out = gridplan(
        &[
            "plan",
            "--map",
            &map,
            "--start",
            "0,0",
            "--goal",
            "3,3",
            "--planner",
            "grounded",
            "--scorer",
            "oracle",
            "--out-dir",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let mut names: Vec<String> = fs::read_dir(dir.path().join("o"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["plan.svg", "trace.jsonl"]);
    let trace = fs::read_to_string(dir.path().join("o/trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 6);
    let mut top: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    top.sort();
    assert_eq!(top, ["o", "w.map"]);
}

#[test]
fn gen_maps_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridplan(
        &[
            "gen-maps",
            "--count",
            "3",
            "--size",
            "20",
            "--density",
            "0.25",
            "--seed",
            "5",
            "--out-dir",
            "a",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let mut names: Vec<String> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "map_20x20_d0.25_s5.map",
            "map_20x20_d0.25_s6.map",
            "map_20x20_d0.25_s7.map"
        ]
    );

    gridplan(
        &[
            "gen-maps",
            "--count",
            "3",
            "--size",
            "20",
            "--density",
            "0.25",
            "--seed",
            "5",
            "--out-dir",
            "b",
        ],
        dir.path(),
    );
    for n in &names {
        assert_eq!(
            fs::read(dir.path().join("a").join(n)).unwrap(),
            fs::read(dir.path().join("b").join(n)).unwrap()
        );
    }
    let out = gridplan(&["gen-maps", "--density", "1.2", "--out-dir", "c"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("c").exists());
}

#[test]
fn bench_missing_suite_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridplan(&["bench", "nope.toml", "--out-dir", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("nope.toml"));
}

#[test]
fn bench_writes_csv_report_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let scen = "format = \"scenario_v1\"\nid = \"tiny\"\nmap = \"\"\"\n5 3 0.5\n.....\n.###.\n.....\n\"\"\"\nstart = [0, 0]\ngoal = [4, 2]\ninstruction_text = \"go\"\nsensing_radius = 1\n";
    fs::write(dir.path().join("tiny.toml"), scen).unwrap();
    fs::write(
        dir.path().join("suite.toml"),
        "format = \"suite_v1\"\nscenarios = [\"tiny.toml\"]\nplanners = [\"astar\", \"rrt\", \"grounded:oracle\"]\ntrials_per_pair = 3\n",
    )
    .unwrap();
    let out = gridplan(
        &["bench", "suite.toml", "--out-dir", "o", "--parallelism", "2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
    assert!(csv.lines().skip(1).all(|l| l.contains(",true,")));
    assert!(dir.path().join("o/report.txt").exists());
    let svg = fs::read_to_string(dir.path().join("o/plots/tiny.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
}
