//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use serde_json::Value;
use tempfile::TempDir;

use pcis_core::examples::{robot_absorbing_states, robot_grid, robot_obstacle_states};
use pcis_testkit::suites::{self, SuiteReport};

struct Outcome {
    passed: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            passed: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.details.push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
        self.passed &= ok;
    }

    fn suite(&mut self, report: SuiteReport) {
        self.check(report.passed(), report.to_string());
    }
}

fn pcis(out: &Path, args: &[&str]) -> (i32, f64) {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_pcis"))
        .args(args)
        .args(["--out-dir", out.to_str().unwrap()])
        .output()
        .unwrap()
        .status;
    (status.code().unwrap_or(-1), start.elapsed().as_secs_f64())
}

fn metadata(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("metadata.json")).unwrap()).unwrap()
}

fn set_of(meta: &Value) -> BTreeSet<String> {
    meta["set"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect()
}

/// Rows of a CSV file keyed by the first column.
fn csv_rows(path: &Path) -> BTreeMap<String, Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let cols: Vec<String> = l.split(',').map(str::to_string).collect();
            (cols[0].clone(), cols[1..].to_vec())
        })
        .collect()
}

fn robot(tmp: &Path) -> Outcome {
    let mut o = Outcome::new();
    let (milp_dir, vi_dir) = (tmp.join("robot-milp"), tmp.join("robot-vi"));
    let (code, secs) = pcis(&milp_dir, &["infinite", "--example", "robot-grid", "--epsilon", "0.90", "--method", "milp"]);
    o.check(code == 0, format!("milp run exit code {code}"));
    o.check(secs < 30.0, format!("runtime {secs:.2} s < 30 s"));
    let meta = metadata(&milp_dir);
    o.check(meta["iterations"] == 2, format!("iterations {} == 2", meta["iterations"]));
    let set = set_of(&meta);
    o.check(!set.is_empty(), format!("nonempty set ({} states)", set.len()));

    let (model, _) = robot_grid();
    let obstacles: Vec<&str> = robot_obstacle_states(&model).iter().map(|x| model.state_name(x)).collect();
    o.check(
        obstacles.iter().all(|s| !set.contains(*s)),
        format!("set excludes the {} obstacle states", obstacles.len()),
    );
    let rows = csv_rows(&milp_dir.join("result.csv"));
    let absorbing: Vec<&str> = robot_absorbing_states(&model).iter().map(|x| model.state_name(x)).collect();
    let g_one = absorbing
        .iter()
        .all(|s| rows[*s][0].parse::<f64>().map_or(false, |p| (p - 1.0).abs() <= 1e-9));
    o.check(g_one && absorbing.len() == 4, format!("g* = 1 on {absorbing:?}"));

    let (code, _) = pcis(&vi_dir, &["infinite", "--example", "robot-grid", "--epsilon", "0.90", "--method", "vi", "--tol", "1e-9"]);
    o.check(code == 0, format!("vi run exit code {code}"));
    let vi_rows = csv_rows(&vi_dir.join("result.csv"));
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (state, cols) in &rows {
        if let (Ok(a), Ok(b)) = (cols[0].parse::<f64>(), vi_rows[state][0].parse::<f64>()) {
            worst = worst.max((a - b).abs());
            compared += 1;
        }
    }
    o.check(worst <= 1e-6 && compared > 0, format!("milp vs vi max |Δp| {worst:.2e} <= 1e-6 over {compared} states"));
    o.check(set == set_of(&metadata(&vi_dir)), "milp and vi sets agree".into());
    o
}

fn thermal(tmp: &Path) -> Outcome {
    let mut o = Outcome::new();
    let dir = tmp.join("thermal");
    let (code, secs) = pcis(
        &dir,
        &[
            "simulate", "--example", "thermal", "--epsilon", "0.97", "--horizon", "50", "--cells", "100",
            "--control-points", "41", "--ignore-approx-error", "--x0", "23", "--trials", "1000", "--seed", "0",
        ],
    );
    o.check(code == 0, format!("exit code {code}"));
    o.check(secs < 60.0, format!("runtime {secs:.2} s < 60 s"));
    let grid = csv_rows(&dir.join("grid.csv"));
    let probs: Vec<f64> = grid.values().map(|c| c[c.len() - 2].parse().unwrap()).collect();
    let min = probs.iter().copied().fold(f64::INFINITY, f64::min);
    o.check(probs.len() == 100, format!("{} cells on [23, 28]", probs.len()));
    o.check(min >= 0.97, format!("min V^_0 over cells {min:.5} >= 0.97"));
    let sim = csv_rows(&dir.join("sim.csv"));
    let empirical: f64 = sim["23"][1].parse().unwrap();
    let violation = 1.0 - empirical;
    o.check(violation <= 0.03, format!("violation frequency from 23 C {violation:.3} <= 0.03 (1000 trajectories)"));
    o
}

fn example_one(tmp: &Path) -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let run = |n: usize, eps: &str| {
        let dir = tmp.join(format!("ex1-{n}-{eps}"));
        let n = n.to_string();
        let (code, _) = pcis(
            &dir,
            &[
                "finite", "--example", "double-integrator-like", "--epsilon", eps, "--horizon", &n, "--cells",
                "50,50", "--control-points", "11", "--ignore-approx-error",
            ],
        );
        (code, metadata(&dir))
    };
    let (code, main) = run(5, "0.80");
    let iterations = main["iterations"].as_u64().unwrap();
    let main_set = set_of(&main);
    o.check(code == 0, format!("N = 5, ε = 0.80 exit code {code}"));
    o.check(iterations <= 15, format!("iterations {iterations} <= 15, trace {}", main["trace"]));
    o.check(!main_set.is_empty(), format!("nonempty set ({} cells)", main_set.len()));

    let by_n: Vec<BTreeSet<String>> = [1, 3].iter().map(|&n| set_of(&run(n, "0.80").1)).chain([main_set.clone()]).collect();
    let sizes: Vec<usize> = by_n.iter().map(|s| s.len()).collect();
    o.check(by_n.windows(2).all(|w| w[1].is_subset(&w[0])), format!("N = 1, 3, 5 nested, sizes {sizes:?}"));

    let by_eps: Vec<BTreeSet<String>> = vec![set_of(&run(5, "0.70").1), main_set, set_of(&run(5, "0.90").1)];
    let sizes: Vec<usize> = by_eps.iter().map(|s| s.len()).collect();
    o.check(by_eps.windows(2).all(|w| w[1].is_subset(&w[0])), format!("ε = 0.70, 0.80, 0.90 nested, sizes {sizes:?}"));
    let secs = start.elapsed().as_secs_f64();
    o.check(secs < 300.0, format!("total runtime {secs:.1} s < 300 s"));
    o
}

fn oracles() -> Outcome {
    let mut o = Outcome::new();
    o.suite(suites::dp_vs_lp(200, 1));
    o.suite(suites::milp_vs_vi(100, 2, 1e-5));
    o.suite(suites::exhaustive_policy(100, 3));
    o.suite(suites::lp_vs_vertices(500, 4));
    o.suite(suites::milp_vs_assignments(500, 5));
    o
}

fn invariants() -> Outcome {
    let mut o = Outcome::new();
    o.suite(suites::monotone_shrink(200, 6));
    o.suite(suites::union_closure(100, 7));
    o.suite(suites::rcis_seeded_inclusion(50, 8));
    o.suite(suites::ginf_below_finite(100, 9));
    o.suite(suites::grid_error_bound(5));
    o
}

fn main() -> ExitCode {
    let tmp = TempDir::new().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 robot grid, infinite horizon, ε = 0.90", Box::new(|| robot(tmp.path()))),
        ("2 thermal, 100 cells, N = 50", Box::new(|| thermal(tmp.path()))),
        ("3 double-integrator-like, 50x50 grid, nesting in N and ε", Box::new(|| example_one(tmp.path()))),
        ("4 oracle suites", Box::new(oracles)),
        ("5 invariant suites", Box::new(invariants)),
    ];
    let mut all = true;
    for (name, run) in &criteria {
        let start = Instant::now();
        let outcome = run();
        all &= outcome.passed;
        println!(
            "{} criterion {name} ({:.1} s)",
            if outcome.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for d in &outcome.details {
            println!("       {d}");
        }
    }
    println!("acceptance: {}", if all { "all criteria pass" } else { "some criteria FAIL" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
