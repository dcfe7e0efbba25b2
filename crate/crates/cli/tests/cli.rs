use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn pcis(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_pcis")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn pcis_in(dir: &Path, args: &[&str]) -> Run {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out-dir", dir.to_str().unwrap()]);
    pcis(&all)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn set_of(meta: &Value) -> Vec<String> {
    meta["set"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect()
}

/// Two states `s`, `out`; only `s` is safe and leaks 0.1 per step.
fn leaky_chain(dir: &Path) -> String {
    let path = dir.join("leaky.json");
    let doc = serde_json::json!({
        "type": "discrete",
        "states": ["s", "out"],
        "actions": ["go"],
        "kernel": [
            {"x": "s", "u": "go", "y": "s", "p": 0.9},
            {"x": "s", "u": "go", "y": "out", "p": 0.1},
            {"x": "out", "u": "go", "y": "out", "p": 1.0}
        ],
        "safe_set": ["s"]
    });
    fs::write(&path, doc.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn examples_write_the_three_models() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();

    assert_eq!(pcis(&["examples", "robot-grid", "--out-dir", out]).code, 0);
    let robot = json(&dir.path().join("robot-grid.json"));
    assert_eq!(robot["type"], "discrete");
    assert_eq!(robot["states"].as_array().unwrap().len(), 64);
    assert_eq!(robot["actions"].as_array().unwrap().len(), 4);

    assert_eq!(pcis(&["examples", "thermal", "--out-dir", out]).code, 0);
    let thermal = json(&dir.path().join("thermal.json"));
    assert_eq!(thermal["state_dim"], 1);
    assert_eq!(thermal["dynamics"]["noise"]["sigma"], 0.5);
    assert_eq!(thermal["dynamics"]["A"][0][0], 0.9);
    assert_eq!(thermal["control_box"][0], serde_json::json!([-2.0, 2.0]));

    assert_eq!(pcis(&["examples", "double-integrator-like", "--out-dir", out]).code, 0);
    let di = json(&dir.path().join("double-integrator-like.json"));
    assert_eq!(di["dynamics"]["A"], serde_json::json!([[1.6, 1.1], [-0.7, 1.2]]));
    assert_eq!(di["dynamics"]["B"], serde_json::json!([[1.0], [1.0]]));
    assert!((di["dynamics"]["noise"]["sigma"].as_f64().unwrap() - 1.0 / 30.0).abs() < 1e-15);

    let r = pcis(&["examples", "nope", "--out-dir", out]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("unknown example"));
}

#[test]
fn written_models_load_back() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    pcis(&["examples", "robot-grid", "--out-dir", d.to_str().unwrap()]);
    pcis(&["examples", "double-integrator-like", "--out-dir", d.to_str().unwrap()]);
    let from_file = pcis_in(&d.join("a"), &["infinite", "--model", d.join("robot-grid.json").to_str().unwrap(), "--epsilon", "0.9"]);
    let builtin = pcis_in(&d.join("b"), &["infinite", "--example", "robot-grid", "--epsilon", "0.9"]);
    assert_eq!(from_file.code, 0);
    assert_eq!(
        fs::read(d.join("a/result.csv")).unwrap(),
        fs::read(d.join("b/result.csv")).unwrap()
    );
    assert_eq!(builtin.code, 0);
    let r = pcis_in(
        &d.join("c"),
        &[
            "finite",
            "--model",
            d.join("double-integrator-like.json").to_str().unwrap(),
            "--epsilon",
            "0.8",
            "--horizon",
            "1",
            "--cells",
            "10,10",
            "--control-points",
            "11",
            "--ignore-approx-error",
        ],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(d.join("c/grid.csv").exists());
}

#[test]
fn thermal_finite_covers_the_interval() {
    let dir = TempDir::new().unwrap();
    let r = pcis_in(
        dir.path(),
        &["finite", "--example", "thermal", "--epsilon", "0.98", "--horizon", "50", "--delta", "0.05", "--ignore-approx-error", "--svg"],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let meta = json(&dir.path().join("metadata.json"));
    assert_eq!(meta["set_size"], 100);
    assert_eq!(meta["certification"], "uncertified");
    let grid = fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let rows: Vec<Vec<&str>> = grid.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| r[5] == "1"));
    let lo = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!((lo, hi), (23.0, 28.0));
    assert!(fs::read_to_string(dir.path().join("heatmap.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn coarse_grid_without_the_flag_is_an_error() {
    let dir = TempDir::new().unwrap();
    let r = pcis_in(dir.path(), &["finite", "--example", "thermal", "--epsilon", "0.98", "--horizon", "50", "--delta", "0.05"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("maximum admissible grid size"), "{}", r.stderr);
}

#[test]
fn zero_epsilon_keeps_the_safe_space() {
    let dir = TempDir::new().unwrap();
    let r = pcis_in(dir.path(), &["finite", "--example", "robot-grid", "--epsilon", "0", "--horizon", "1"]);
    assert_eq!(r.code, 0);
    let meta = json(&dir.path().join("metadata.json"));
    assert_eq!(meta["set_size"], meta["settings"]["safe_set_size"]);
    assert_eq!(meta["set_size"], 56);
}

#[test]
fn leaky_chain_is_empty_with_exit_two() {
    let dir = TempDir::new().unwrap();
    let model = leaky_chain(dir.path());
    // V_0(s) = 0.81 < 0.9 over two steps.
    let r = pcis_in(&dir.path().join("f"), &["finite", "--model", &model, "--epsilon", "0.9", "--horizon", "2"]);
    assert_eq!(r.code, 2);
    assert_eq!(json(&dir.path().join("f/metadata.json"))["set_size"], 0);
    let r = pcis_in(&dir.path().join("g"), &["finite", "--model", &model, "--epsilon", "0.8", "--horizon", "2"]);
    assert_eq!(r.code, 0);
    // No robust set and ε = 1 leaves nothing.
    let r = pcis_in(&dir.path().join("i"), &["infinite", "--model", &model, "--epsilon", "1"]);
    assert_eq!(r.code, 2);
    let r = pcis_in(&dir.path().join("r"), &["rcis", "--model", &model]);
    assert_eq!(r.code, 2);
}

#[test]
fn robot_infinite_logs_two_iterations_and_seeded_is_a_subset() {
    let dir = TempDir::new().unwrap();
    let r = pcis_in(&dir.path().join("m"), &["infinite", "--example", "robot-grid", "--epsilon", "0.90"]);
    assert_eq!(r.code, 0);
    let log = fs::read_to_string(dir.path().join("m/run.log")).unwrap();
    assert!(log.contains("iterations: 2"), "{log}");
    let milp = json(&dir.path().join("m/metadata.json"));
    assert_eq!(milp["method"], "milp");

    let r = pcis_in(&dir.path().join("s"), &["infinite", "--example", "robot-grid", "--epsilon", "0.90", "--method", "rcis-seeded"]);
    assert_eq!(r.code, 0);
    let seeded = json(&dir.path().join("s/metadata.json"));
    let full = set_of(&milp);
    assert!(set_of(&seeded).iter().all(|x| full.contains(x)));
}

#[test]
fn simulate_and_existence_commands() {
    let dir = TempDir::new().unwrap();
    let r = pcis_in(
        &dir.path().join("s"),
        &["simulate", "--example", "robot-grid", "--epsilon", "0.9", "--horizon", "inf", "--x0", "x3y3E", "--trials", "500"],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let sim = fs::read_to_string(dir.path().join("s/sim.csv")).unwrap();
    assert!(sim.lines().nth(1).unwrap().ends_with("pass"), "{sim}");

    let r = pcis_in(&dir.path().join("x"), &["simulate", "--example", "robot-grid", "--epsilon", "0.9", "--horizon", "inf", "--x0", "x2y2E"]);
    assert_eq!(r.code, 1);

    let r = pcis_in(&dir.path().join("c"), &["check-existence", "--example", "robot-grid", "--epsilon", "0.9"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("necessary condition holds"));
    let doc = json(&dir.path().join("c/existence.json"));
    assert_eq!(doc["seed_states"].as_array().unwrap().len(), 4);
}

#[test]
fn bad_arguments_exit_one() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["finite", "--example", "robot-grid", "--epsilon", "1.5", "--horizon", "3"][..],
        &["finite", "--example", "robot-grid", "--epsilon", "0.5", "--horizon", "0"],
        &["finite", "--example", "robot-grid", "--epsilon", "0.5", "--horizon", "3", "--method", "magic"],
        &["finite", "--model", "/nonexistent/model.json", "--epsilon", "0.5", "--horizon", "3"],
    ] {
        assert_eq!(pcis_in(dir.path(), args).code, 1, "{args:?}");
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn commands_are_idempotent() {
    let dir = TempDir::new().unwrap();
    let runs: [&[&str]; 3] = [
        &["finite", "--example", "thermal", "--epsilon", "0.9", "--horizon", "10", "--delta", "0.1", "--ignore-approx-error", "--svg"],
        &["simulate", "--example", "robot-grid", "--epsilon", "0.9", "--horizon", "5", "--x0", "x3y3E", "--trials", "300", "--seed", "4"],
        &["infinite", "--example", "robot-grid", "--epsilon", "0.5", "--method", "vi"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let a = dir.path().join(format!("{i}a"));
        let b = dir.path().join(format!("{i}b"));
        assert_eq!(pcis_in(&a, args).code, 0);
        let mut with_threads = args.to_vec();
        with_threads.extend(["--threads", "1"]);
        assert_eq!(pcis_in(&b, &with_threads).code, 0);
        assert_eq!(files(&a), files(&b), "{args:?}");
    }
}
