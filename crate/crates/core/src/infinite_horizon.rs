//! Infinite-horizon invariance probabilities G*∞, robust controlled invariant
//! sets and infinite-horizon ε-PCIS algorithms.

use serde::{Deserialize, Serialize};

use crate::error::{PcisError, Result};
use crate::finite_horizon::{
    bellman_sweep, check_epsilon, shrink_loop, Certification, Horizon, Method, PcisResult,
    ResultPolicy, Round, THRESHOLD_SLACK,
};
use crate::model::{DiscreteModel, StateSet};
use crate::solver::{MixedIntegerLinearProgram, Relation, Sense, SolverConfig};

/// Retained-mass threshold for robust invariance.
pub const RCIS_TOLERANCE: f64 = 1e-12;
/// Largest binary count for which `auto` picks the MILP route.
pub const AUTO_MILP_MAX_BINARIES: usize = 400;

/// G*∞ per member of `set`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GTable {
    pub set: StateSet,
    pub values: Vec<f64>,
    /// Value-iteration sweeps (0 for the MILP route).
    pub iterations: usize,
    /// Final sup-norm change between sweeps.
    pub residual: f64,
    pub converged: bool,
    /// Largest pointwise increase seen between sweeps; nonpositive up to
    /// rounding for a correct recursion.
    pub max_increase: f64,
}

impl GTable {
    pub fn value(&self, state: usize) -> Option<f64> {
        self.set.position(state).map(|i| self.values[i])
    }
}

/// Time-invariant policy; `actions[i]` is the action of the i-th member of `set`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    pub set: StateSet,
    pub actions: Vec<usize>,
}

impl StationaryPolicy {
    pub fn action(&self, state: usize) -> Option<usize> {
        self.set.position(state).map(|i| self.actions[i])
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

/// G₀ = 1, G_{k+1}(x) = max_u Σ_{y∈Q} G_k(y)T(y|x,u) until both the sup-norm
/// change and its geometric tail estimate drop below `tol`; also returns the
/// greedy policy of the last sweep.
pub fn value_iteration_ginf(
    model: &DiscreteModel,
    q: &StateSet,
    tol: f64,
    max_iter: usize,
) -> Result<(GTable, StationaryPolicy)> {
    check_set(model, q)?;
    if !(tol > 0.0) {
        return Err(PcisError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let mut g = vec![0.0; model.num_states()];
    for x in q.iter() {
        g[x] = 1.0;
    }
    let mut actions = vec![0; q.len()];
    let mut residual = f64::INFINITY;
    let mut max_increase = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let sweep = bellman_sweep(model, q, &g);
        iterations += 1;
        let previous = residual;
        residual = 0.0;
        for (i, (x, (v, a))) in q.iter().zip(sweep).enumerate() {
            let d = v - g[x];
            max_increase = max_increase.max(d);
            residual = f64::max(residual, d.abs());
            g[x] = v;
            actions[i] = a;
        }
        // Geometric tail r·ρ/(1−ρ) with ρ the last contraction ratio.
        let rho = if previous.is_finite() && previous > 0.0 {
            residual / previous
        } else {
            0.0
        };
        let tail = if residual == 0.0 {
            0.0
        } else if rho < 1.0 {
            residual * rho / (1.0 - rho)
        } else {
            f64::INFINITY
        };
        if residual < tol && tail < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("value iteration stopped after {iterations} sweeps with residual {residual:e}");
    }
    Ok((
        GTable {
            set: q.clone(),
            values: q.iter().map(|x| g[x]).collect(),
            iterations,
            residual,
            converged,
            max_increase,
        },
        StationaryPolicy {
            set: q.clone(),
            actions,
        },
    ))
}

/// Variable layout of [`build_infinite_milp`].
#[derive(Clone, Debug)]
pub struct MilpLayout {
    /// g(x) column per member.
    pub g: Vec<usize>,
    /// κ(x,u) columns per member, one per admissible action in order.
    pub kappa: Vec<Vec<usize>>,
}

/// MILP whose optimum is G*∞ on `q`; `delta` is the big-M constant (> 1).
pub fn build_infinite_milp(
    model: &DiscreteModel,
    q: &StateSet,
    delta: f64,
) -> Result<(MixedIntegerLinearProgram, MilpLayout)> {
    check_set(model, q)?;
    if !(delta > 1.0) {
        return Err(PcisError::InvalidArgument(format!("Δ must exceed 1, got {delta}")));
    }
    let mut milp = MixedIntegerLinearProgram::new(Sense::Maximize);
    let g: Vec<usize> = q
        .iter()
        .map(|x| milp.lp.add_variable(format!("g({})", model.state_name(x)), 0.0, 1.0, 1.0))
        .collect();
    let kappa: Vec<Vec<usize>> = q
        .iter()
        .map(|x| {
            model
                .actions_of(x)
                .iter()
                .map(|&a| {
                    milp.add_binary(
                        format!("k({},{})", model.state_name(x), model.action_name(a)),
                        0.0,
                    )
                })
                .collect()
        })
        .collect();
    for (i, x) in q.iter().enumerate() {
        for (k, (a, row)) in model.rows_of(x).enumerate() {
            let mut coeffs = vec![(g[i], 1.0)];
            for (y, p) in row.iter() {
                if let Some(j) = q.position(y) {
                    if j == i {
                        coeffs[0].1 -= p;
                    } else {
                        coeffs.push((g[j], -p));
                    }
                }
            }
            let tag = format!("{}_{}", model.state_name(x), model.action_name(a));
            milp.lp
                .add_constraint(format!("lower_{tag}"), coeffs.clone(), Relation::Ge, 0.0);
            coeffs.push((kappa[i][k], delta));
            milp.lp
                .add_constraint(format!("upper_{tag}"), coeffs, Relation::Le, delta);
        }
        milp.lp.add_constraint(
            format!("pick_{}", model.state_name(x)),
            kappa[i].iter().map(|&c| (c, 1.0)).collect(),
            Relation::Ge,
            1.0,
        );
    }
    Ok((milp, MilpLayout { g, kappa }))
}

/// G*∞ and a stationary policy from the MILP; the policy takes the
/// lowest-index action with κ = 1.
pub fn solve_ginf_exact(
    model: &DiscreteModel,
    q: &StateSet,
    delta: f64,
    solver: &SolverConfig,
) -> Result<(GTable, StationaryPolicy)> {
    let (milp, layout) = build_infinite_milp(model, q, delta)?;
    let out = solver.solve_milp("infinite_milp", &milp)?.into_optimal()?;
    let values: Vec<f64> = layout.g.iter().map(|&c| out.values[c].clamp(0.0, 1.0)).collect();
    let actions = q
        .iter()
        .zip(&layout.kappa)
        .map(|(x, ks)| {
            let k = ks.iter().position(|&c| out.values[c] > 0.5).unwrap_or(0);
            model.actions_of(x)[k]
        })
        .collect();
    Ok((
        GTable {
            set: q.clone(),
            values,
            iterations: 0,
            residual: 0.0,
            converged: true,
            max_increase: 0.0,
        },
        StationaryPolicy {
            set: q.clone(),
            actions,
        },
    ))
}

/// Lowest-index action keeping all mass inside the set flagged by `mask`.
fn robust_action(model: &DiscreteModel, x: usize, mask: &[bool]) -> Option<usize> {
    model
        .rows_of(x)
        .find(|(_, row)| row.mass_in(mask) >= 1.0 - RCIS_TOLERANCE)
        .map(|(a, _)| a)
}

/// Greatest R ⊆ Q with ∃u: T(R|x,u) = 1 for every x ∈ R (possibly empty).
pub fn rcis_discrete(model: &DiscreteModel, q: &StateSet) -> Result<StateSet> {
    check_set(model, q)?;
    let mut r = q.clone();
    loop {
        let mask = r.mask(model.num_states());
        let next: StateSet = r
            .iter()
            .filter(|&x| robust_action(model, x, &mask).is_some())
            .collect();
        if next == r {
            return Ok(r);
        }
        r = next;
    }
}

/// Lowest-index robust action per state of `r`; `None` if some state has none.
pub fn rcis_policy(model: &DiscreteModel, r: &StateSet) -> Option<StationaryPolicy> {
    let mask = r.mask(model.num_states());
    let actions = r
        .iter()
        .map(|x| robust_action(model, x, &mask))
        .collect::<Option<Vec<_>>>()?;
    Some(StationaryPolicy {
        set: r.clone(),
        actions,
    })
}

/// True when every state of `r` has an action keeping all mass in `r`.
pub fn is_rcis(model: &DiscreteModel, r: &StateSet) -> bool {
    let mask = r.mask(model.num_states());
    !r.is_empty() && r.iter().all(|x| robust_action(model, x, &mask).is_some())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfiniteMethod {
    #[default]
    Auto,
    Milp,
    Vi,
}

#[derive(Clone, Debug)]
pub struct InfiniteOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub big_m: f64,
    pub solver: SolverConfig,
}

impl Default for InfiniteOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 1_000_000,
            big_m: 2.0,
            solver: SolverConfig::default(),
        }
    }
}

/// Largest infinite-horizon ε-PCIS inside `q`, with default options.
pub fn largest_infinite_pcis(
    model: &DiscreteModel,
    q: &StateSet,
    epsilon: f64,
    method: InfiniteMethod,
) -> Result<PcisResult> {
    largest_infinite_pcis_with(model, q, epsilon, method, &InfiniteOptions::default())
}

/// Largest infinite-horizon ε-PCIS inside `q`, recomputing G*∞ each round.
///
/// Under `vi` a state is kept when G − residual ≥ ε − 1e-12.
pub fn largest_infinite_pcis_with(
    model: &DiscreteModel,
    q: &StateSet,
    epsilon: f64,
    method: InfiniteMethod,
    opts: &InfiniteOptions,
) -> Result<PcisResult> {
    check_set(model, q)?;
    check_epsilon(epsilon)?;
    let mut diagnostics = Vec::new();
    let method = match method {
        InfiniteMethod::Auto => {
            let binaries = model.num_pairs_in(q);
            if binaries <= AUTO_MILP_MAX_BINARIES {
                InfiniteMethod::Milp
            } else {
                let msg = format!(
                    "{binaries} binaries exceed {AUTO_MILP_MAX_BINARIES}; using value iteration, \
                     thresholds use a converged but inexact G*∞"
                );
                log::warn!("{msg}");
                diagnostics.push(msg);
                InfiniteMethod::Vi
            }
        }
        m => m,
    };
    let mut unconverged = 0;
    let shrink = shrink_loop(model.num_states(), q, |p, _| {
        let (g, policy) = match method {
            InfiniteMethod::Vi => value_iteration_ginf(model, p, opts.tol, opts.max_iter)?,
            _ => solve_ginf_exact(model, p, opts.big_m, &opts.solver)?,
        };
        if !g.converged {
            unconverged += 1;
        }
        let slack = if method == InfiniteMethod::Vi { g.residual } else { 0.0 };
        Ok(Round {
            values: g.values,
            slack,
            policy: ResultPolicy::Stationary(policy),
            threshold: epsilon,
        })
    })?;
    if unconverged > 0 {
        diagnostics.push(format!("value iteration unconverged in {unconverged} rounds"));
    }
    diagnostics.extend(shrink.diagnostics);
    Ok(PcisResult {
        set: shrink.set,
        probabilities: shrink.probabilities,
        policy: shrink.policy,
        trace: shrink.trace,
        iterations: shrink.iterations,
        epsilon,
        threshold: epsilon,
        horizon: Horizon::Infinite,
        method: if method == InfiniteMethod::Vi { Method::Vi } else { Method::Milp },
        certification: Certification::Exact,
        tau0_delta: None,
        diagnostics,
    })
}

/// Seeds with the RCIS Q_f and keep every x ∈ Q with an action
/// reaching Q_f with probability at least ε.
pub fn infinite_pcis_via_rcis(model: &DiscreteModel, q: &StateSet, epsilon: f64) -> Result<PcisResult> {
    check_set(model, q)?;
    check_epsilon(epsilon)?;
    let qf = rcis_discrete(model, q)?;
    let mut probabilities = vec![None; model.num_states()];
    let mut diagnostics = Vec::new();
    if qf.is_empty() {
        diagnostics.push("no RCIS seed".to_string());
        return Ok(PcisResult {
            set: qf,
            probabilities,
            policy: ResultPolicy::None,
            trace: vec![q.len(), 0],
            iterations: 1,
            epsilon,
            threshold: epsilon,
            horizon: Horizon::Infinite,
            method: Method::RcisSeeded,
            certification: Certification::Exact,
            tau0_delta: None,
            diagnostics,
        });
    }
    let mask = qf.mask(model.num_states());
    let mut set = Vec::new();
    let mut actions = Vec::new();
    for x in q.iter() {
        let (a, p) = if qf.contains(x) {
            (robust_action(model, x, &mask).expect("seed states are robust"), 1.0)
        } else {
            let masses: Vec<f64> = (0..model.actions_of(x).len())
                .map(|k| model.row(x, k).mass_in(&mask))
                .collect();
            let (k, best) = crate::finite_horizon::argmax_lowest(&masses);
            (model.actions_of(x)[k], best)
        };
        probabilities[x] = Some(p);
        if p >= epsilon - THRESHOLD_SLACK {
            set.push(x);
            actions.push(a);
        }
    }
    let set = StateSet::from_indices(set);
    Ok(PcisResult {
        trace: vec![q.len(), set.len()],
        policy: ResultPolicy::Stationary(StationaryPolicy {
            set: set.clone(),
            actions,
        }),
        set,
        probabilities,
        iterations: 1,
        epsilon,
        threshold: epsilon,
        horizon: Horizon::Infinite,
        method: Method::RcisSeeded,
        certification: Certification::Exact,
        tau0_delta: None,
        diagnostics,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExistenceReport {
    pub necessary_holds: bool,
    pub sufficient_holds: bool,
}

/// Necessary and sufficient conditions for an infinite-horizon ε-PCIS built
/// around the robust seed `qf ⊆ q`.
pub fn check_existence_conditions(
    model: &DiscreteModel,
    q: &StateSet,
    qf: &StateSet,
    epsilon: f64,
) -> Result<ExistenceReport> {
    check_set(model, q)?;
    check_epsilon(epsilon)?;
    if !qf.is_subset(q) {
        return Err(PcisError::InvalidArgument("seed set must lie inside Q".into()));
    }
    if !is_rcis(model, qf) {
        return Err(PcisError::SeedNotRobust);
    }
    let n = model.num_states();
    let q_mask = q.mask(n);
    let f_mask = qf.mask(n);
    let rest = q.difference(qf);
    let rest_mask = rest.mask(n);
    let mut necessary = true;
    let mut sufficient = true;
    for x in rest.iter() {
        let rows: Vec<_> = (0..model.actions_of(x).len()).map(|k| model.row(x, k)).collect();
        necessary &= rows
            .iter()
            .any(|r| r.mass_in(&q_mask) >= epsilon - THRESHOLD_SLACK);
        sufficient &= rows.iter().any(|r| {
            r.mass_in(&f_mask) + epsilon * r.mass_in(&rest_mask) >= epsilon - THRESHOLD_SLACK
        });
    }
    Ok(ExistenceReport {
        necessary_holds: necessary,
        sufficient_holds: sufficient,
    })
}
