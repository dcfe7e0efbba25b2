//! `pcis`: probabilistic controlled invariant sets from the command line.

mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "pcis", version, about = "Probabilistic controlled invariant sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Largest N-step ε-PCIS (exact for discrete models, grid abstraction for continuous ones).
    Finite(Common),
    /// Largest infinite-horizon ε-PCIS of a discrete model.
    Infinite(Common),
    /// Largest robust controlled invariant set of a discrete model.
    Rcis(Common),
    /// Compute a PCIS, then validate its probabilities by Monte Carlo rollouts.
    Simulate(Common),
    /// Check the existence conditions for an infinite-horizon ε-PCIS around a robust seed set.
    CheckExistence(Common),
    /// Write a built-in example model file (robot-grid, thermal, double-integrator-like).
    Examples {
        name: String,
        #[arg(long, default_value = "pcis-out")]
        out_dir: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Model file (JSON).
    #[arg(long, conflicts_with = "example", required_unless_present = "example")]
    pub model: Option<PathBuf>,
    /// Built-in example name.
    #[arg(long)]
    pub example: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of steps, or `inf`.
    #[arg(long)]
    pub horizon: Option<String>,
    /// Grid size δ for continuous models.
    #[arg(long)]
    pub delta: Option<f64>,
    /// State cells per axis (comma separated), overriding δ for the state grid.
    #[arg(long, value_delimiter = ',')]
    pub cells: Option<Vec<usize>>,
    /// Control cells per axis (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub control_points: Option<Vec<usize>>,
    /// dp|lp (finite), auto|milp|vi|rcis-seeded (infinite).
    #[arg(long)]
    pub method: Option<String>,
    /// Big-M constant Δ of the infinite-horizon MILP.
    #[arg(long, default_value_t = 2.0)]
    pub big_m: f64,
    /// Value-iteration tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Extra tolerance on simulation verdicts.
    #[arg(long, default_value_t = 0.0)]
    pub slack: f64,
    /// Step cap for infinite-horizon rollouts (default 10·|Q|).
    #[arg(long)]
    pub step_cap: Option<usize>,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Skip the τ₀δ correction; results are labeled uncertified.
    #[arg(long)]
    pub ignore_approx_error: bool,
    #[arg(long, default_value = "pcis-out")]
    pub out_dir: PathBuf,
    /// Also write an SVG heatmap (1-D and 2-D grids).
    #[arg(long)]
    pub svg: bool,
    /// auto|reference|highs
    #[arg(long, default_value = "auto")]
    pub solver: String,
    /// Write every LP/MILP in LP format to this directory.
    #[arg(long)]
    pub dump_problems: Option<PathBuf>,
    /// Initial states for `simulate`: state names, or comma-separated coordinates.
    #[arg(long)]
    pub x0: Vec<String>,
    /// Robust seed set (state names, comma separated); defaults to the largest RCIS.
    #[arg(long, value_delimiter = ',')]
    pub seed_states: Option<Vec<String>>,
    /// Safe set override (state names, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub safe_set: Option<Vec<String>>,
    /// Maximum number of state cells.
    #[arg(long, default_value_t = pcis_core::discretize::DEFAULT_MAX_CELLS)]
    pub max_cells: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Finite(c) => run::with_threads(&c, || run::finite(&c)),
        Command::Infinite(c) => run::with_threads(&c, || run::infinite(&c)),
        Command::Rcis(c) => run::with_threads(&c, || run::rcis(&c)),
        Command::Simulate(c) => run::with_threads(&c, || run::simulate(&c)),
        Command::CheckExistence(c) => run::with_threads(&c, || run::check_existence(&c)),
        Command::Examples { name, out_dir } => run::examples(&name, &out_dir),
    };
    match outcome {
        Ok(run::Status::Nonempty) => ExitCode::SUCCESS,
        Ok(run::Status::Empty) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
