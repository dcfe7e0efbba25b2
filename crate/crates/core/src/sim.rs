//! Monte Carlo rollouts that validate computed invariance probabilities.
//!
//! Trial `t` from the `j`-th initial state draws from ChaCha20 seeded with
//! `seed` (via `seed_from_u64`) on stream `j·2^40 + t`, so reports do not
//! depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::Abstraction;
use crate::error::{PcisError, Result};
use crate::finite_horizon::{Horizon, ResultPolicy};
use crate::model::{ContinuousModel, DiscreteModel, StateSet};

pub const RNG_NAME: &str = "ChaCha20";
/// z-score of a two-sided 99% interval.
pub const Z_99: f64 = 2.576;
/// Step cap per working-set state for infinite-horizon rollouts.
pub const DEFAULT_CAP_FACTOR: usize = 10;
/// Allowance for rounding in computed probabilities.
pub const NUMERIC_SLACK: f64 = 1e-9;

/// 99% normal-approximation half-width of a binomial proportion.
pub fn ci_halfwidth(p_hat: f64, trials: u64) -> f64 {
    Z_99 * (p_hat * (1.0 - p_hat) / trials as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// No computed probability to compare with.
    Unchecked,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Unchecked => "unchecked",
        }
    }
}

/// How empirical and computed probabilities are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// |p̂ − p| ≤ half-width + slack.
    TwoSided,
    /// p̂ ≥ p − half-width − slack; used with a step cap, where staying for
    /// the capped horizon is only a necessary condition.
    LowerBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub state: String,
    pub computed_p: Option<f64>,
    pub stays: u64,
    pub empirical_p: f64,
    pub ci_halfwidth: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub trials: u64,
    pub steps: usize,
    pub seed: u64,
    pub rng: String,
    pub check: Check,
    pub slack: f64,
    pub rows: Vec<SimRow>,
}

impl SimReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub trials: u64,
    pub seed: u64,
    /// Extra tolerance added to the confidence interval.
    pub slack: f64,
    /// Steps for infinite-horizon rollouts; 10·|Q| when unset.
    pub step_cap: Option<usize>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 0,
            slack: 0.0,
            step_cap: None,
        }
    }
}

fn trial_rng(seed: u64, start: usize, trial: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((start as u64) << 40) | trial);
    rng
}

fn make_row(state: String, computed: Option<f64>, stays: u64, opts: &SimOptions, check: Check) -> SimRow {
    let p_hat = stays as f64 / opts.trials as f64;
    let hw = ci_halfwidth(p_hat, opts.trials);
    let verdict = match computed {
        None => Verdict::Unchecked,
        Some(p) => {
            let tol = hw + opts.slack + NUMERIC_SLACK;
            let ok = match check {
                Check::TwoSided => (p_hat - p).abs() <= tol,
                Check::LowerBound => p_hat >= p - tol,
            };
            if ok {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
    };
    SimRow {
        state,
        computed_p: computed,
        stays,
        empirical_p: p_hat,
        ci_halfwidth: hw,
        verdict,
    }
}

/// Counts trials returning `Ok(true)`; the lowest-index error wins.
fn count_stays<F>(trials: u64, run: F) -> Result<u64>
where
    F: Fn(u64) -> Result<bool> + Send + Sync,
{
    let outcomes: Vec<Result<bool>> = (0..trials).into_par_iter().map(run).collect();
    let mut stays = 0;
    for o in outcomes {
        if o? {
            stays += 1;
        }
    }
    Ok(stays)
}

fn sample_row(model: &DiscreteModel, x: usize, a: usize, rng: &mut ChaCha20Rng) -> usize {
    let row = model.row_for(x, a).expect("admissible action has a row");
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = x;
    for (y, p) in row.iter() {
        acc += p;
        last = y;
        if r < acc {
            return y;
        }
    }
    last
}

/// Rolls `policy` out from each state of `x0` and counts trajectories whose
/// states x_0, …, x_steps all lie in `q`. `computed` is indexed by model
/// state (as in [`crate::finite_horizon::PcisResult::probabilities`]).
pub fn simulate_discrete(
    model: &DiscreteModel,
    policy: &ResultPolicy,
    q: &StateSet,
    x0: &[usize],
    horizon: Horizon,
    computed: &[Option<f64>],
    opts: &SimOptions,
) -> Result<SimReport> {
    if opts.trials == 0 {
        return Err(PcisError::InvalidArgument("trials must be at least 1".into()));
    }
    let (steps, check) = match horizon {
        Horizon::Finite(n) => (n, Check::TwoSided),
        Horizon::Infinite => (
            opts.step_cap.unwrap_or(DEFAULT_CAP_FACTOR * q.len()),
            Check::LowerBound,
        ),
    };
    let mut rows = Vec::with_capacity(x0.len());
    for (j, &start) in x0.iter().enumerate() {
        if start >= model.num_states() {
            return Err(PcisError::StateOutOfRange(start));
        }
        if !q.contains(start) {
            return Err(PcisError::InvalidArgument(format!(
                "initial state `{}` is outside the set",
                model.state_name(start)
            )));
        }
        let stays = count_stays(opts.trials, |t| {
            let mut rng = trial_rng(opts.seed, j, t);
            let mut x = start;
            for k in 0..steps {
                let a = policy.action(k, x).ok_or_else(|| PcisError::PolicyUndefined {
                    state: model.state_name(x).to_string(),
                    step: k,
                })?;
                x = sample_row(model, x, a, &mut rng);
                if !q.contains(x) {
                    return Ok(false);
                }
            }
            Ok(true)
        })?;
        let p = computed.get(start).copied().flatten();
        rows.push(make_row(model.state_name(start).to_string(), p, stays, opts, check));
    }
    Ok(SimReport {
        trials: opts.trials,
        steps,
        seed: opts.seed,
        rng: RNG_NAME.into(),
        check,
        slack: opts.slack,
        rows,
    })
}

fn point_label(x: &[f64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Rolls the true dynamics for `n` steps, applying the control of the
/// abstraction action chosen for the cell containing the current state.
/// `cells` is the retained cell set; leaving it marks a violation.
/// `computed` is indexed by abstraction state.
pub fn simulate_continuous(
    cont: &ContinuousModel,
    abstraction: &Abstraction,
    policy: &ResultPolicy,
    cells: &StateSet,
    x0: &[Vec<f64>],
    n: usize,
    computed: &[Option<f64>],
    opts: &SimOptions,
) -> Result<SimReport> {
    if opts.trials == 0 {
        return Err(PcisError::InvalidArgument("trials must be at least 1".into()));
    }
    if !cont.has_sampler() {
        return Err(PcisError::InvalidArgument("model has no sampler".into()));
    }
    let grid = &abstraction.states;
    let inside = |x: &[f64]| grid.locate(x).filter(|&c| cells.contains(c));
    let mut rows = Vec::with_capacity(x0.len());
    for (j, start) in x0.iter().enumerate() {
        let c0 = inside(start).ok_or_else(|| {
            PcisError::InvalidArgument(format!("initial state {start:?} is outside the set"))
        })?;
        let stays = count_stays(opts.trials, |t| {
            let mut rng = trial_rng(opts.seed, j, t);
            let mut x = start.clone();
            let mut c = c0;
            for k in 0..n {
                let a = policy.action(k, c).ok_or_else(|| PcisError::PolicyUndefined {
                    state: abstraction.model.state_name(c).to_string(),
                    step: k,
                })?;
                x = cont.sample(&x, abstraction.control(a), &mut rng)?;
                match inside(&x) {
                    Some(next) => c = next,
                    None => return Ok(false),
                }
            }
            Ok(true)
        })?;
        let p = computed.get(c0).copied().flatten();
        rows.push(make_row(point_label(start), p, stays, opts, Check::TwoSided));
    }
    Ok(SimReport {
        trials: opts.trials,
        steps: n,
        seed: opts.seed,
        rng: RNG_NAME.into(),
        check: Check::TwoSided,
        slack: opts.slack,
        rows,
    })
}
