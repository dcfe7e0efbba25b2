use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;

use pcis_core::discretize::{approx_finite_pcis_on, abstract_model_with, ApproxResult, GridSpec};
use pcis_core::examples::ExampleName;
use pcis_core::finite_horizon::{
    largest_finite_pcis_with, Certification, FiniteMethod, Horizon, Method, PcisResult, ResultPolicy,
};
use pcis_core::infinite_horizon::{
    check_existence_conditions, infinite_pcis_via_rcis, largest_infinite_pcis_with, rcis_discrete,
    rcis_policy, InfiniteMethod, InfiniteOptions,
};
use pcis_core::model::{
    continuous_to_json, discrete_to_json, load_model, ContinuousModel, DiscreteModel, LoadedModel,
    Region, StateSet,
};
use pcis_core::output::{heatmap_svg, write_grid_csv, write_result_csv, write_sim_csv, Metadata};
use pcis_core::sim::{simulate_continuous, simulate_discrete, SimOptions, SimReport};
use pcis_core::solver::{Backend, SolverConfig};

use crate::Common;

pub enum Status {
    Nonempty,
    Empty,
}

impl Status {
    fn of(set: &StateSet) -> Self {
        if set.is_empty() {
            Status::Empty
        } else {
            Status::Nonempty
        }
    }
}

pub fn with_threads<F>(c: &Common, f: F) -> Result<Status>
where
    F: FnOnce() -> Result<Status> + Send,
{
    match c.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")?
            .install(f),
        None => f(),
    }
}

struct Source {
    label: String,
    example: Option<ExampleName>,
    loaded: LoadedModel,
}

fn load(c: &Common) -> Result<Source> {
    if let Some(name) = &c.example {
        let example: ExampleName = name.parse()?;
        return Ok(Source {
            label: format!("example {example}"),
            example: Some(example),
            loaded: example.load()?,
        });
    }
    let path = c.model.as_ref().ok_or_else(|| anyhow!("--model or --example is required"))?;
    let loaded = load_model(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(Source {
        label: format!("model {}", path.display()),
        example: None,
        loaded,
    })
}

fn epsilon(c: &Common) -> Result<f64> {
    c.epsilon.ok_or_else(|| anyhow!("--epsilon is required"))
}

fn horizon(c: &Common) -> Result<Horizon> {
    match c.horizon.as_deref() {
        None => bail!("--horizon is required"),
        Some("inf") => Ok(Horizon::Infinite),
        Some(s) => {
            let n: usize = s.parse().map_err(|_| anyhow!("--horizon must be a positive integer or `inf`, got `{s}`"))?;
            if n == 0 {
                bail!("--horizon must be at least 1");
            }
            Ok(Horizon::Finite(n))
        }
    }
}

fn solver_config(c: &Common) -> Result<SolverConfig> {
    let backend: Backend = c.solver.parse()?;
    let mut cfg = SolverConfig::with_backend(backend);
    cfg.dump_dir = c.dump_problems.clone();
    Ok(cfg)
}

fn working_set(c: &Common, model: &DiscreteModel, safe: &Option<StateSet>) -> Result<StateSet> {
    Ok(match (&c.safe_set, safe) {
        (Some(names), _) => model.state_set(names)?,
        (None, Some(s)) => s.clone(),
        (None, None) => StateSet::full(model.num_states()),
    })
}

fn grid_spec(c: &Common, example: Option<ExampleName>, region: &Region) -> Result<GridSpec> {
    match (c.delta, &c.cells, &c.control_points) {
        (_, Some(cells), Some(controls)) => Ok(GridSpec::Counts {
            state: cells.clone(),
            control: controls.clone(),
        }),
        (Some(_), Some(_), None) => bail!("--cells needs --control-points"),
        (None, Some(_), None) => bail!("--cells needs --control-points"),
        (Some(d), None, Some(controls)) => Ok(GridSpec::delta_with_controls(d, controls.clone(), region)?),
        (Some(d), None, None) => Ok(GridSpec::Delta(d)),
        (None, None, _) => example
            .and_then(|e| e.default_grid())
            .ok_or_else(|| anyhow!("continuous models need --delta or --cells with --control-points")),
    }
}

enum Computed {
    Discrete {
        model: DiscreteModel,
        result: PcisResult,
        settings: serde_json::Value,
    },
    Continuous {
        cont: ContinuousModel,
        approx: Box<ApproxResult>,
        settings: serde_json::Value,
    },
}

impl Computed {
    fn result(&self) -> &PcisResult {
        match self {
            Computed::Discrete { result, .. } => result,
            Computed::Continuous { approx, .. } => &approx.result,
        }
    }

    fn model(&self) -> &DiscreteModel {
        match self {
            Computed::Discrete { model, .. } => model,
            Computed::Continuous { approx, .. } => &approx.abstraction.model,
        }
    }
}

fn compute_finite(c: &Common, src: Source, n: usize) -> Result<Computed> {
    let eps = epsilon(c)?;
    match src.loaded {
        LoadedModel::Discrete { model, safe_set } => {
            let q = working_set(c, &model, &safe_set)?;
            let method = match c.method.as_deref() {
                None | Some("dp") => FiniteMethod::Dp,
                Some("lp") => FiniteMethod::Lp,
                Some(m) => bail!("unknown finite-horizon method `{m}` (expected dp or lp)"),
            };
            let solver = solver_config(c)?;
            let result = largest_finite_pcis_with(&model, &q, n, eps, method, &solver)?;
            let settings = json!({ "solver": c.solver, "safe_set_size": q.len() });
            Ok(Computed::Discrete {
                model,
                result,
                settings,
            })
        }
        LoadedModel::Continuous { model, region } => {
            if !matches!(c.method.as_deref(), None | Some("dp")) {
                bail!("continuous models only support the dp method");
            }
            let region = region.ok_or_else(|| anyhow!("continuous model file has no region"))?;
            let spec = grid_spec(c, src.example, &region)?;
            let abstraction = abstract_model_with(&model, &region, &spec, c.max_cells)?;
            let settings = json!({
                "grid": spec,
                "delta": abstraction.delta,
                "eta": abstraction.controls.eta,
                "cells": abstraction.states.counts(),
                "control_points": abstraction.controls.counts(),
                "lipschitz": abstraction.lipschitz,
                "volume": abstraction.volume,
                "ignore_approx_error": c.ignore_approx_error,
            });
            let approx = approx_finite_pcis_on(abstraction, n, eps, c.ignore_approx_error)?;
            Ok(Computed::Continuous {
                cont: model,
                approx: Box::new(approx),
                settings,
            })
        }
    }
}

fn compute_infinite(c: &Common, src: Source) -> Result<Computed> {
    let eps = epsilon(c)?;
    let LoadedModel::Discrete { model, safe_set } = src.loaded else {
        bail!("infinite-horizon sets need a discrete model");
    };
    let q = working_set(c, &model, &safe_set)?;
    let opts = InfiniteOptions {
        tol: c.tol,
        max_iter: c.max_iter,
        big_m: c.big_m,
        solver: solver_config(c)?,
    };
    let result = match c.method.as_deref() {
        Some("rcis-seeded") => infinite_pcis_via_rcis(&model, &q, eps)?,
        m => {
            let method = match m {
                None | Some("auto") => InfiniteMethod::Auto,
                Some("milp") => InfiniteMethod::Milp,
                Some("vi") => InfiniteMethod::Vi,
                Some(m) => bail!("unknown infinite-horizon method `{m}` (expected auto, milp, vi or rcis-seeded)"),
            };
            largest_infinite_pcis_with(&model, &q, eps, method, &opts)?
        }
    };
    let settings = json!({
        "solver": c.solver,
        "big_m": c.big_m,
        "tol": c.tol,
        "safe_set_size": q.len(),
    });
    Ok(Computed::Discrete {
        model,
        result,
        settings,
    })
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn run_log(command: &str, source: &str, result: &PcisResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command: {command}");
    let _ = writeln!(s, "source: {source}");
    let _ = writeln!(s, "method: {}", result.method);
    let _ = writeln!(s, "epsilon: {}", result.epsilon);
    let _ = writeln!(s, "horizon: {}", result.horizon);
    for (i, w) in result.trace.windows(2).enumerate() {
        let _ = writeln!(s, "iteration {}: {} -> {} states", i + 1, w[0], w[1]);
    }
    let _ = writeln!(s, "iterations: {}", result.iterations);
    let _ = writeln!(s, "threshold: {}", result.threshold);
    if let Some(t) = result.tau0_delta {
        let _ = writeln!(s, "tau0_delta: {t}");
    }
    let _ = writeln!(s, "certification: {:?}", result.certification);
    let _ = writeln!(s, "result: {} states", result.set.len());
    for d in &result.diagnostics {
        let _ = writeln!(s, "diagnostic: {d}");
    }
    s
}

fn write_outputs(c: &Common, command: &str, source: &str, computed: &Computed) -> Result<()> {
    fs::create_dir_all(&c.out_dir).with_context(|| format!("creating {}", c.out_dir.display()))?;
    let result = computed.result();
    let model = computed.model();
    write_result_csv(create(&c.out_dir.join("result.csv"))?, model, result)?;
    let settings = match computed {
        Computed::Discrete { settings, .. } | Computed::Continuous { settings, .. } => settings.clone(),
    };
    let meta = Metadata::new(command, source, model, result, settings);
    fs::write(c.out_dir.join("metadata.json"), meta.to_json()? + "\n")?;
    if let Computed::Continuous { approx, .. } = computed {
        write_grid_csv(create(&c.out_dir.join("grid.csv"))?, &approx.abstraction, result)?;
        if c.svg {
            let title = format!("{command} {source}: eps = {}, N = {}", result.epsilon, result.horizon);
            match heatmap_svg(&approx.abstraction, result, &title) {
                Some(svg) => fs::write(c.out_dir.join("heatmap.svg"), svg)?,
                None => log::warn!("no heatmap for state dimension above 2"),
            }
        }
    } else if c.svg {
        log::warn!("heatmaps are only drawn for gridded continuous models");
    }
    fs::write(c.out_dir.join("run.log"), run_log(command, source, result))?;
    Ok(())
}

fn summarize(command: &str, computed: &Computed, elapsed: f64) {
    let r = computed.result();
    let model = computed.model();
    let cert = match r.certification {
        Certification::Exact => "exact",
        Certification::Certified => "certified",
        Certification::Uncertified => "uncertified",
    };
    println!(
        "{command}: {} states kept after {} iterations (method {}, {cert}), trace {:?}",
        r.set.len(),
        r.iterations,
        r.method,
        r.trace
    );
    if let Computed::Discrete { .. } = computed {
        if r.set.len() <= 16 {
            let names: Vec<&str> = r.set.iter().map(|x| model.state_name(x)).collect();
            println!("set: {}", names.join(", "));
        }
    }
    for d in &r.diagnostics {
        println!("note: {d}");
    }
    log::info!("{command} finished in {elapsed:.2} s");
}

pub fn finite(c: &Common) -> Result<Status> {
    let start = Instant::now();
    let n = match horizon(c)? {
        Horizon::Finite(n) => n,
        Horizon::Infinite => bail!("`finite` needs a finite --horizon; use `infinite` for N = inf"),
    };
    let src = load(c)?;
    let label = src.label.clone();
    let computed = compute_finite(c, src, n)?;
    write_outputs(c, "finite", &label, &computed)?;
    summarize("finite", &computed, start.elapsed().as_secs_f64());
    Ok(Status::of(&computed.result().set))
}

pub fn infinite(c: &Common) -> Result<Status> {
    let start = Instant::now();
    let src = load(c)?;
    let label = src.label.clone();
    let computed = compute_infinite(c, src)?;
    write_outputs(c, "infinite", &label, &computed)?;
    summarize("infinite", &computed, start.elapsed().as_secs_f64());
    Ok(Status::of(&computed.result().set))
}

pub fn rcis(c: &Common) -> Result<Status> {
    let start = Instant::now();
    let src = load(c)?;
    let label = src.label.clone();
    let LoadedModel::Discrete { model, safe_set } = src.loaded else {
        bail!("`rcis` needs a discrete model");
    };
    let q = working_set(c, &model, &safe_set)?;
    let set = rcis_discrete(&model, &q)?;
    let mut probabilities = vec![None; model.num_states()];
    for x in set.iter() {
        probabilities[x] = Some(1.0);
    }
    let policy = rcis_policy(&model, &set).map_or(ResultPolicy::None, ResultPolicy::Stationary);
    let result = PcisResult {
        trace: vec![q.len(), set.len()],
        set,
        probabilities,
        policy,
        iterations: 1,
        epsilon: 1.0,
        threshold: 1.0,
        horizon: Horizon::Infinite,
        method: Method::Rcis,
        certification: Certification::Exact,
        tau0_delta: None,
        diagnostics: Vec::new(),
    };
    let computed = Computed::Discrete {
        model,
        result,
        settings: json!({}),
    };
    write_outputs(c, "rcis", &label, &computed)?;
    summarize("rcis", &computed, start.elapsed().as_secs_f64());
    Ok(Status::of(&computed.result().set))
}

fn parse_point(s: &str, dim: usize) -> Result<Vec<f64>> {
    let x: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| anyhow!("--x0 `{s}` is not a list of numbers"))?;
    if x.len() != dim {
        bail!("--x0 `{s}` has {} coordinates, the state dimension is {dim}", x.len());
    }
    Ok(x)
}

pub fn simulate(c: &Common) -> Result<Status> {
    let start = Instant::now();
    let h = horizon(c)?;
    let src = load(c)?;
    let label = src.label.clone();
    let computed = match h {
        Horizon::Finite(n) => compute_finite(c, src, n)?,
        Horizon::Infinite => compute_infinite(c, src)?,
    };
    write_outputs(c, "simulate", &label, &computed)?;
    summarize("simulate", &computed, start.elapsed().as_secs_f64());
    let result = computed.result();
    let mut opts = SimOptions {
        trials: c.trials,
        seed: c.seed,
        slack: c.slack,
        step_cap: c.step_cap,
    };
    let report: SimReport = match &computed {
        Computed::Discrete { model, .. } => {
            let x0: Vec<usize> = if c.x0.is_empty() {
                result.set.iter().collect()
            } else {
                c.x0
                    .iter()
                    .map(|n| model.state_index(n).ok_or_else(|| anyhow!("unknown state `{n}` in --x0")))
                    .collect::<Result<_>>()?
            };
            if x0.is_empty() {
                println!("simulate: the set is empty, nothing to roll out");
                return Ok(Status::Empty);
            }
            simulate_discrete(model, &result.policy, &result.set, &x0, h, &result.probabilities, &opts)?
        }
        Computed::Continuous { cont, approx, .. } => {
            let grid = &approx.abstraction.states;
            let x0: Vec<Vec<f64>> = if c.x0.is_empty() {
                result.set.iter().map(|cell| grid.representative(cell).to_vec()).collect()
            } else {
                c.x0.iter().map(|s| parse_point(s, grid.dim())).collect::<Result<_>>()?
            };
            if x0.is_empty() {
                println!("simulate: the set is empty, nothing to roll out");
                return Ok(Status::Empty);
            }
            if result.certification == Certification::Certified {
                opts.slack += result.tau0_delta.unwrap_or(0.0);
            }
            let Horizon::Finite(n) = h else { unreachable!() };
            simulate_continuous(cont, &approx.abstraction, &result.policy, &result.set, &x0, n, &result.probabilities, &opts)?
        }
    };
    write_sim_csv(create(&c.out_dir.join("sim.csv"))?, &report)?;
    fs::write(c.out_dir.join("sim.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    let fails = report.rows.iter().filter(|r| r.verdict == pcis_core::sim::Verdict::Fail).count();
    let mean: f64 = report.rows.iter().map(|r| r.empirical_p).sum::<f64>() / report.rows.len() as f64;
    println!(
        "simulate: {} initial states, {} trials each over {} steps ({} seed {}), mean stay frequency {mean:.4}, {fails} failed checks",
        report.rows.len(),
        report.trials,
        report.steps,
        report.rng,
        report.seed
    );
    Ok(Status::Nonempty)
}

pub fn check_existence(c: &Common) -> Result<Status> {
    let eps = epsilon(c)?;
    let src = load(c)?;
    let LoadedModel::Discrete { model, safe_set } = src.loaded else {
        bail!("`check-existence` needs a discrete model");
    };
    let q = working_set(c, &model, &safe_set)?;
    let qf = match &c.seed_states {
        Some(names) => model.state_set(names)?,
        None => rcis_discrete(&model, &q)?,
    };
    let seeds: Vec<&str> = qf.iter().map(|x| model.state_name(x)).collect();
    let report = check_existence_conditions(&model, &q, &qf, eps)?;
    fs::create_dir_all(&c.out_dir)?;
    let doc = json!({
        "source": src.label,
        "epsilon": eps,
        "seed_states": seeds,
        "necessary_holds": report.necessary_holds,
        "sufficient_holds": report.sufficient_holds,
    });
    fs::write(c.out_dir.join("existence.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    println!(
        "check-existence: necessary condition {}, sufficient condition {}",
        if report.necessary_holds { "holds" } else { "fails" },
        if report.sufficient_holds { "holds" } else { "fails" }
    );
    Ok(Status::Nonempty)
}

pub fn examples(name: &str, out_dir: &Path) -> Result<Status> {
    let example: ExampleName = name.parse()?;
    let text = match example.load()? {
        LoadedModel::Discrete { model, safe_set } => {
            discrete_to_json(&model, safe_set.as_ref(), Some(example.description()))?
        }
        LoadedModel::Continuous { model, region } => {
            continuous_to_json(&model, region.as_ref(), Some(example.description()))?
        }
    };
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let path = out_dir.join(format!("{example}.json"));
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    println!("{}", path.display());
    Ok(Status::Nonempty)
}
