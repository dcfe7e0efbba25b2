//! N-step invariance probabilities, Markov policies and the largest N-step
//! ε-PCIS inside a set.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PcisError, Result};
use crate::infinite_horizon::StationaryPolicy;
use crate::model::{DiscreteModel, StateSet};
use crate::solver::{LinearProgram, Relation, Sense, SolverConfig};

/// Slack applied to every ε comparison.
pub const THRESHOLD_SLACK: f64 = 1e-12;
/// Values within this distance of the maximum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;
/// Equality tolerance when reading a policy off an LP solution.
pub const LP_POLICY_TOLERANCE: f64 = 1e-7;

/// V*_k on a working set; `values[k][i]` belongs to the i-th member of `set`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub horizon: usize,
    pub set: StateSet,
    pub values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn value(&self, k: usize, state: usize) -> Option<f64> {
        self.set.position(state).map(|i| self.values[k][i])
    }

    /// V*_0, the N-step invariance probability, per member.
    pub fn initial(&self) -> &[f64] {
        &self.values[0]
    }
}

/// Time-varying policy; `actions[k][i]` is the action index for the i-th
/// member of `set` at step k.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkovPolicy {
    pub set: StateSet,
    pub actions: Vec<Vec<usize>>,
}

impl MarkovPolicy {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn action(&self, k: usize, state: usize) -> Option<usize> {
        let i = self.set.position(state)?;
        self.actions.get(k).map(|row| row[i])
    }
}

/// Policy attached to a [`PcisResult`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResultPolicy {
    None,
    Markov(MarkovPolicy),
    Stationary(StationaryPolicy),
}

impl ResultPolicy {
    /// Action at step `k` (ignored for stationary policies).
    pub fn action(&self, k: usize, state: usize) -> Option<usize> {
        match self {
            ResultPolicy::None => None,
            ResultPolicy::Markov(p) => p.action(k, state),
            ResultPolicy::Stationary(p) => p.action(state),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dp,
    Lp,
    Milp,
    Vi,
    RcisSeeded,
    Rcis,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dp => "dp",
            Method::Lp => "lp",
            Method::Milp => "milp",
            Method::Vi => "vi",
            Method::RcisSeeded => "rcis-seeded",
            Method::Rcis => "rcis",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Certification {
    /// Computed on the exact discrete kernel.
    Exact,
    /// Grid abstraction with the τ₀δ correction applied.
    Certified,
    /// Grid abstraction with the approximation error ignored.
    Uncertified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(n) => write!(f, "{n}"),
            Horizon::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Horizon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Finite(n) => s.serialize_u64(*n as u64),
            Horizon::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(Horizon::Finite(n)),
            Raw::S(s) if s == "inf" => Ok(Horizon::Infinite),
            Raw::S(s) => Err(serde::de::Error::custom(format!("bad horizon `{s}`"))),
        }
    }
}

/// Outcome of a largest-PCIS computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcisResult {
    pub set: StateSet,
    /// Probability per model state from the last round that evaluated it;
    /// `None` for states never in the working set.
    pub probabilities: Vec<Option<f64>>,
    pub policy: ResultPolicy,
    /// |P_0|, |P_1|, …; the last entry repeats the previous one on
    /// convergence, or is 0 when the set emptied.
    pub trace: Vec<usize>,
    pub iterations: usize,
    pub epsilon: f64,
    /// Threshold applied in the final round (ε̂ for grid abstractions).
    pub threshold: f64,
    pub horizon: Horizon,
    pub method: Method,
    pub certification: Certification,
    /// τ₀(P)·δ of the final round, for grid abstractions.
    pub tau0_delta: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl PcisResult {
    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn probability(&self, state: usize) -> Option<f64> {
        self.probabilities.get(state).copied().flatten()
    }
}

fn check_set(model: &DiscreteModel, q: &StateSet) -> Result<()> {
    if q.is_empty() {
        return Err(PcisError::EmptyRestriction);
    }
    match q.iter().find(|&s| s >= model.num_states()) {
        Some(s) => Err(PcisError::StateOutOfRange(s)),
        None => Ok(()),
    }
}

/// Index of the maximizing action value: lowest index within [`TIE_TOLERANCE`].
pub(crate) fn argmax_lowest(values: &[f64]) -> (usize, f64) {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k = values
        .iter()
        .position(|&v| v >= best - TIE_TOLERANCE)
        .unwrap_or(0);
    (k, best)
}

/// One Bellman sweep over `q`: returns (max value, argmax action) per member.
/// `next` is indexed by model state and must be zero outside `q`.
pub(crate) fn bellman_sweep(model: &DiscreteModel, q: &StateSet, next: &[f64]) -> Vec<(f64, usize)> {
    q.as_slice()
        .par_iter()
        .map(|&x| {
            let vals: Vec<f64> = (0..model.actions_of(x).len())
                .map(|k| model.row(x, k).dot(next))
                .collect();
            let (k, best) = argmax_lowest(&vals);
            // Row sums may exceed 1 by rounding.
            (best.min(1.0), model.actions_of(x)[k])
        })
        .collect()
}

/// Backward recursion V_N = 1, V_k(x) = max_u Σ_{y∈Q} V_{k+1}(y) T(y|x,u).
pub fn dp_backward(model: &DiscreteModel, q: &StateSet, n: usize) -> Result<(ValueTable, MarkovPolicy)> {
    check_set(model, q)?;
    if n == 0 {
        return Err(PcisError::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut values = vec![vec![0.0; q.len()]; n + 1];
    values[n].fill(1.0);
    let mut actions = vec![vec![0; q.len()]; n];
    let mut next = vec![0.0; model.num_states()];
    for k in (0..n).rev() {
        for (i, x) in q.iter().enumerate() {
            next[x] = values[k + 1][i];
        }
        for (i, (v, a)) in bellman_sweep(model, q, &next).into_iter().enumerate() {
            values[k][i] = v;
            actions[k][i] = a;
        }
    }
    Ok((
        ValueTable {
            horizon: n,
            set: q.clone(),
            values,
        },
        MarkovPolicy {
            set: q.clone(),
            actions,
        },
    ))
}

/// Column of v_k(x) in [`build_finite_lp`] output.
pub fn lp_variable(q: &StateSet, k: usize, local: usize) -> usize {
    k * q.len() + local
}

/// LP whose optimum equals the backward recursion:
/// min Σ_k Σ_x v_k(x) s.t. v_k(x) ≥ Σ_{y∈Q} v_{k+1}(y)T(y|x,u) ∀u, v_N(x) ≥ 1.
pub fn build_finite_lp(model: &DiscreteModel, q: &StateSet, n: usize) -> Result<LinearProgram> {
    check_set(model, q)?;
    if n == 0 {
        return Err(PcisError::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut lp = LinearProgram::new(Sense::Minimize);
    for k in 0..=n {
        for x in q.iter() {
            lp.add_variable(
                format!("v{k}({})", model.state_name(x)),
                f64::NEG_INFINITY,
                f64::INFINITY,
                1.0,
            );
        }
    }
    for k in 0..n {
        for (i, x) in q.iter().enumerate() {
            for (a, row) in model.rows_of(x) {
                let mut coeffs = vec![(lp_variable(q, k, i), 1.0)];
                for (y, p) in row.iter() {
                    if let Some(j) = q.position(y) {
                        coeffs.push((lp_variable(q, k + 1, j), -p));
                    }
                }
                lp.add_constraint(
                    format!("bellman_{k}_{}_{}", model.state_name(x), model.action_name(a)),
                    coeffs,
                    Relation::Ge,
                    0.0,
                );
            }
        }
    }
    for (i, x) in q.iter().enumerate() {
        lp.add_constraint(
            format!("terminal_{}", model.state_name(x)),
            vec![(lp_variable(q, n, i), 1.0)],
            Relation::Ge,
            1.0,
        );
    }
    Ok(lp)
}

/// Reads a [`ValueTable`] from an optimal solution of [`build_finite_lp`].
pub fn values_from_lp(q: &StateSet, n: usize, solution: &[f64]) -> ValueTable {
    ValueTable {
        horizon: n,
        set: q.clone(),
        values: (0..=n)
            .map(|k| (0..q.len()).map(|i| solution[lp_variable(q, k, i)]).collect())
            .collect(),
    }
}

/// Per (k, x), the lowest-index action whose constraint is tight within
/// [`LP_POLICY_TOLERANCE`].
pub fn extract_policy_from_lp(
    model: &DiscreteModel,
    q: &StateSet,
    n: usize,
    solution: &[f64],
) -> Result<MarkovPolicy> {
    check_set(model, q)?;
    let mut actions = vec![vec![0; q.len()]; n];
    let mut next = vec![0.0; model.num_states()];
    for k in 0..n {
        for (j, y) in q.iter().enumerate() {
            next[y] = solution[lp_variable(q, k + 1, j)];
        }
        for (i, x) in q.iter().enumerate() {
            let v = solution[lp_variable(q, k, i)];
            let a = model
                .rows_of(x)
                .find(|(_, row)| (v - row.dot(&next)).abs() <= LP_POLICY_TOLERANCE)
                .map(|(a, _)| a)
                .ok_or_else(|| PcisError::LpDpInconsistency {
                    step: k,
                    state: model.state_name(x).to_string(),
                })?;
            actions[k][i] = a;
        }
    }
    Ok(MarkovPolicy {
        set: q.clone(),
        actions,
    })
}

/// Solves the finite LP and returns values and the extracted policy.
pub fn solve_finite_lp(
    model: &DiscreteModel,
    q: &StateSet,
    n: usize,
    solver: &SolverConfig,
) -> Result<(ValueTable, MarkovPolicy)> {
    let lp = build_finite_lp(model, q, n)?;
    let out = solver.solve_lp("finite_lp", &lp)?.into_optimal()?;
    let policy = extract_policy_from_lp(model, q, n, &out.values)?;
    Ok((values_from_lp(q, n, &out.values), policy))
}

/// S*_{ε,N}: members whose V*_0 is at least ε (with [`THRESHOLD_SLACK`]).
pub fn backward_reachable_set(values: &ValueTable, epsilon: f64) -> StateSet {
    values
        .set
        .iter()
        .zip(values.initial())
        .filter(|&(_, &v)| v >= epsilon - THRESHOLD_SLACK)
        .map(|(x, _)| x)
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiniteMethod {
    #[default]
    Dp,
    Lp,
}

/// Values computed in one shrink round.
pub(crate) struct Round {
    /// Per member of the working set.
    pub values: Vec<f64>,
    /// Subtracted from each value before thresholding.
    pub slack: f64,
    pub policy: ResultPolicy,
    /// Threshold for this round.
    pub threshold: f64,
}

pub(crate) struct Shrink {
    pub set: StateSet,
    pub probabilities: Vec<Option<f64>>,
    pub policy: ResultPolicy,
    pub trace: Vec<usize>,
    pub iterations: usize,
    pub threshold: f64,
    pub diagnostics: Vec<String>,
}

/// P_{i+1} = {x ∈ P_i : value_i(x) − slack ≥ threshold_i − 1e-12} until the
/// set is stable or empty, at most |Q| rounds.
pub(crate) fn shrink_loop<F>(num_states: usize, q: &StateSet, mut round: F) -> Result<Shrink>
where
    F: FnMut(&StateSet, usize) -> Result<Round>,
{
    let mut p = q.clone();
    let mut probabilities = vec![None; num_states];
    let mut trace = vec![p.len()];
    let mut iterations = 0;
    let mut diagnostics = Vec::new();
    let mut threshold = f64::NAN;
    let cap = q.len();
    loop {
        if p.is_empty() {
            return Ok(Shrink {
                set: p,
                probabilities,
                policy: ResultPolicy::None,
                trace,
                iterations,
                threshold,
                diagnostics,
            });
        }
        iterations += 1;
        let r = round(&p, iterations)?;
        threshold = r.threshold;
        let mut keep = Vec::with_capacity(p.len());
        for (x, &v) in p.iter().zip(&r.values) {
            probabilities[x] = Some(v);
            if v - r.slack >= r.threshold - THRESHOLD_SLACK {
                keep.push(x);
            }
        }
        let keep = StateSet::from_indices(keep);
        trace.push(keep.len());
        log::info!("round {iterations}: {} -> {} states", p.len(), keep.len());
        if keep == p {
            return Ok(Shrink {
                set: p,
                probabilities,
                policy: r.policy,
                trace,
                iterations,
                threshold,
                diagnostics,
            });
        }
        if iterations >= cap {
            let msg = format!("iteration cap of {cap} rounds reached before the set stabilized");
            log::warn!("{msg}");
            diagnostics.push(msg);
            let policy = if keep.is_empty() {
                ResultPolicy::None
            } else {
                r.policy
            };
            return Ok(Shrink {
                set: keep,
                probabilities,
                policy,
                trace,
                iterations,
                threshold,
                diagnostics,
            });
        }
        p = keep;
    }
}

/// Largest N-step ε-PCIS inside `q`, using the default solver configuration.
pub fn largest_finite_pcis(
    model: &DiscreteModel,
    q: &StateSet,
    n: usize,
    epsilon: f64,
    method: FiniteMethod,
) -> Result<PcisResult> {
    largest_finite_pcis_with(model, q, n, epsilon, method, &SolverConfig::default())
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..=1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(PcisError::InvalidArgument(format!("ε must lie in [0, 1], got {epsilon}")))
    }
}

/// Largest N-step ε-PCIS inside `q`, recomputing values on each shrunken set.
pub fn largest_finite_pcis_with(
    model: &DiscreteModel,
    q: &StateSet,
    n: usize,
    epsilon: f64,
    method: FiniteMethod,
    solver: &SolverConfig,
) -> Result<PcisResult> {
    check_set(model, q)?;
    check_epsilon(epsilon)?;
    if n == 0 {
        return Err(PcisError::InvalidArgument("horizon must be at least 1".into()));
    }
    let shrink = shrink_loop(model.num_states(), q, |p, _| {
        let (values, policy) = match method {
            FiniteMethod::Dp => dp_backward(model, p, n)?,
            FiniteMethod::Lp => solve_finite_lp(model, p, n, solver)?,
        };
        Ok(Round {
            values: values.initial().to_vec(),
            slack: 0.0,
            policy: ResultPolicy::Markov(policy),
            threshold: epsilon,
        })
    })?;
    Ok(PcisResult {
        set: shrink.set,
        probabilities: shrink.probabilities,
        policy: shrink.policy,
        trace: shrink.trace,
        iterations: shrink.iterations,
        epsilon,
        threshold: epsilon,
        horizon: Horizon::Finite(n),
        method: match method {
            FiniteMethod::Dp => Method::Dp,
            FiniteMethod::Lp => Method::Lp,
        },
        certification: Certification::Exact,
        tau0_delta: None,
        diagnostics: shrink.diagnostics,
    })
}

/// True when every state of `q` has V*_0 ≥ ε computed on `q` itself.
pub fn is_finite_pcis(model: &DiscreteModel, q: &StateSet, n: usize, epsilon: f64) -> Result<bool> {
    if q.is_empty() {
        return Ok(true);
    }
    let (values, _) = dp_backward(model, q, n)?;
    Ok(values.initial().iter().all(|&v| v >= epsilon - THRESHOLD_SLACK))
}
