//! Seeded check suites shared by the property tests and the acceptance run.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pcis_core::discretize::{abstract_model, Abstraction, ErrorModel, GridSpec};
use pcis_core::finite_horizon::{
    dp_backward, is_finite_pcis, largest_finite_pcis, solve_finite_lp, FiniteMethod,
};
use pcis_core::infinite_horizon::{
    infinite_pcis_via_rcis, largest_infinite_pcis, solve_ginf_exact, value_iteration_ginf,
    InfiniteMethod,
};
use pcis_core::model::{AxisBox, ContinuousModel, Region, StateSet, TransitionDensity};
use pcis_core::solver::{solve_lp, solve_milp, Backend, SolveStatus, SolverConfig};

use crate::gen::{random_bounded_lp, random_mdp, random_milp, random_subset};
use crate::oracle::{assignment_enumeration, exhaustive_v0, vertex_enumeration, TiltedUniform, Uniform};

/// Outcome of one suite: worst observed deviation against its tolerance,
/// plus any structural failures.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            cases: 0,
            max_deviation: 0.0,
            tolerance,
            failures: Vec::new(),
        }
    }

    fn deviation(&mut self, case: usize, d: f64) {
        if d.is_nan() || d > self.tolerance {
            self.failures.push(format!("case {case}: deviation {d:e}"));
        }
        if !(d <= self.max_deviation) {
            self.max_deviation = d;
        }
    }

    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} cases, max deviation {:.3e} (tolerance {:.0e})",
            self.name, self.cases, self.max_deviation, self.tolerance
        )?;
        if let Some(first) = self.failures.first() {
            write!(f, "; {} failures, first: {first}", self.failures.len())?;
        }
        Ok(())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn reference() -> SolverConfig {
    SolverConfig::with_backend(Backend::Reference)
}

/// DP recursion against the LP on random models (≤ 8 states, ≤ 3 actions,
/// N ≤ 5), over every V*_k(x).
pub fn dp_vs_lp(cases: usize, seed: u64) -> SuiteReport {
    let mut r = SuiteReport::new("DP = LP", 1e-7);
    let mut g = rng(seed);
    let solver = reference();
    for case in 0..cases {
        let model = random_mdp(&mut g, 8, 3);
        let q = random_subset(&mut g, model.num_states());
        let n = g.gen_range(1..=5);
        let (dp, _) = dp_backward(&model, &q, n).unwrap();
        match solve_finite_lp(&model, &q, n, &solver) {
            Ok((lp, _)) => {
                let d = dp
                    .values
                    .iter()
                    .flatten()
                    .zip(lp.values.iter().flatten())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                r.deviation(case, d);
            }
            Err(e) => r.fail(format!("case {case}: LP path failed: {e}")),
        }
        r.cases += 1;
    }
    r
}

/// MILP against value iteration (tol 1e-9) on random models (≤ 6 states,
/// ≤ 3 actions).
pub fn milp_vs_vi(cases: usize, seed: u64, tolerance: f64) -> SuiteReport {
    let mut r = SuiteReport::new("MILP = VI", tolerance);
    let mut g = rng(seed);
    let solver = reference();
    for case in 0..cases {
        let model = random_mdp(&mut g, 6, 3);
        let q = random_subset(&mut g, model.num_states());
        let (vi, _) = value_iteration_ginf(&model, &q, 1e-9, 1_000_000).unwrap();
        match solve_ginf_exact(&model, &q, 2.0, &solver) {
            Ok((milp, _)) => {
                let d = vi
                    .values
                    .iter()
                    .zip(&milp.values)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                r.deviation(case, d);
            }
            Err(e) => r.fail(format!("case {case}: MILP failed: {e}")),
        }
        r.cases += 1;
    }
    r
}

/// V*_0 against the best deterministic Markov policy found by enumeration
/// (≤ 3 states, ≤ 2 actions, N ≤ 3).
pub fn exhaustive_policy(cases: usize, seed: u64) -> SuiteReport {
    let mut r = SuiteReport::new("exhaustive-policy oracle", 1e-9);
    let mut g = rng(seed);
    for case in 0..cases {
        let model = random_mdp(&mut g, 3, 2);
        let q = random_subset(&mut g, model.num_states());
        let n = g.gen_range(1..=3);
        let (dp, _) = dp_backward(&model, &q, n).unwrap();
        let best = exhaustive_v0(&model, &q, n);
        let d = dp
            .initial()
            .iter()
            .zip(&best)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        r.deviation(case, d);
        r.cases += 1;
    }
    r
}

/// Reference simplex against vertex enumeration on box-bounded LPs (≤ 6
/// variables, ≤ 8 rows).
pub fn lp_vs_vertices(cases: usize, seed: u64) -> SuiteReport {
    let mut r = SuiteReport::new("LP vs vertex enumeration", 1e-6);
    let mut g = rng(seed);
    for case in 0..cases {
        let n = g.gen_range(1..=6);
        let lp = random_bounded_lp(&mut g, n, 8);
        let out = solve_lp(&lp);
        match (out.status, vertex_enumeration(&lp)) {
            (SolveStatus::Optimal, Some(v)) => {
                r.deviation(case, (out.objective - v).abs());
                if lp.max_violation(&out.values) > 1e-7 {
                    r.fail(format!("case {case}: returned point violates a row"));
                }
            }
            (SolveStatus::Infeasible, None) => {}
            (s, v) => r.fail(format!("case {case}: solver {s}, enumeration {v:?}")),
        }
        r.cases += 1;
    }
    r
}

/// Branch-and-bound against enumeration of all binary assignments, each
/// completed by `solve_lp` (≤ 4 binaries).
pub fn milp_vs_assignments(cases: usize, seed: u64) -> SuiteReport {
    let mut r = SuiteReport::new("MILP vs assignment enumeration", 1e-6);
    let mut g = rng(seed);
    for case in 0..cases {
        let milp = random_milp(&mut g, 4, 2, 6);
        let out = solve_milp(&milp);
        match (out.status, assignment_enumeration(&milp)) {
            (SolveStatus::Optimal, Some(v)) => r.deviation(case, (out.objective - v).abs()),
            (SolveStatus::Infeasible, None) => {}
            (s, v) => r.fail(format!("case {case}: solver {s}, enumeration {v:?}")),
        }
        r.cases += 1;
    }
    r
}

/// Replays the shrink loop P_{i+1} = {x ∈ P_i : V*_0(x; P_i) ≥ ε} and checks
/// P_{i+1} ⊆ P_i and agreement with the library's trace and final set.
pub fn monotone_shrink(cases: usize, seed: u64) -> SuiteReport {
    let mut r = SuiteReport::new("monotone shrink", 0.0);
    let mut g = rng(seed);
    for case in 0..cases {
        let model = random_mdp(&mut g, 8, 3);
        let q = random_subset(&mut g, model.num_states());
        let n = g.gen_range(1..=5);
        let eps = g.gen_range(0.0..1.0);
        let result = largest_finite_pcis(&model, &q, n, eps, FiniteMethod::Dp).unwrap();
        if result.trace.windows(2).any(|w| w[1] > w[0]) {
            r.fail(format!("case {case}: trace {:?} increases", result.trace));
        }
        let mut p = q.clone();
        let mut trace = vec![p.len()];
        loop {
            if p.is_empty() {
                break;
            }
            let (v, _) = dp_backward(&model, &p, n).unwrap();
            let next: StateSet = p
                .iter()
                .zip(v.initial())
                .filter(|&(_, &val)| val >= eps - 1e-12)
                .map(|(x, _)| x)
                .collect();
            if !next.is_subset(&p) {
                r.fail(format!("case {case}: P_(i+1) not inside P_i"));
            }
            trace.push(next.len());
            if next == p {
                break;
            }
            p = next;
        }
        if trace != result.trace || p != result.set {
            r.fail(format!("case {case}: replay {trace:?} vs library {:?}", result.trace));
        }
        r.cases += 1;
    }
    r
}

/// If P₁ and P₂ pass the N-step verification, so does P₁ ∪ P₂ with
/// N = min(N₁, N₂), ε = min(ε₁, ε₂). Counts only pairs with both sets
/// nonempty.
pub fn union_closure(pairs: usize, seed: u64) -> SuiteReport {
    let mut r = SuiteReport::new("union closure", 0.0);
    let mut g = rng(seed);
    let mut attempts = 0;
    while r.cases < pairs && attempts < pairs * 200 {
        attempts += 1;
        let model = random_mdp(&mut g, 8, 3);
        let n_states = model.num_states();
        let (q1, q2) = (random_subset(&mut g, n_states), random_subset(&mut g, n_states));
        let (n1, n2) = (g.gen_range(1..=5), g.gen_range(1..=5));
        let (e1, e2) = (g.gen_range(0.3..1.0), g.gen_range(0.3..1.0));
        let p1 = largest_finite_pcis(&model, &q1, n1, e1, FiniteMethod::Dp).unwrap().set;
        let p2 = largest_finite_pcis(&model, &q2, n2, e2, FiniteMethod::Dp).unwrap().set;
        if p1.is_empty() || p2.is_empty() {
            continue;
        }
        if !is_finite_pcis(&model, &p1, n1, e1).unwrap() || !is_finite_pcis(&model, &p2, n2, e2).unwrap() {
            r.fail(format!("pair {}: a largest PCIS fails its own verification", r.cases));
        }
        let u = p1.union(&p2);
        if !is_finite_pcis(&model, &u, n1.min(n2), e1.min(e2)).unwrap() {
            r.fail(format!("pair {}: union {:?} fails", r.cases, u.as_slice()));
        }
        r.cases += 1;
    }
    if r.cases < pairs {
        r.fail(format!("only {} nonempty pairs generated", r.cases));
    }
    r
}

/// RCIS-seeded set ⊆ largest infinite-horizon PCIS on the same inputs.
pub fn rcis_seeded_inclusion(cases: usize, seed: u64) -> SuiteReport {
    let mut r = SuiteReport::new("RCIS-seeded ⊆ largest infinite PCIS", 0.0);
    let mut g = rng(seed);
    for case in 0..cases {
        let model = random_mdp(&mut g, 6, 3);
        let q = random_subset(&mut g, model.num_states());
        let eps = g.gen_range(0.3..1.0);
        let seeded = infinite_pcis_via_rcis(&model, &q, eps).unwrap();
        let full = largest_infinite_pcis(&model, &q, eps, InfiniteMethod::Vi).unwrap();
        if !seeded.set.is_subset(&full.set) {
            r.fail(format!(
                "case {case}: {:?} not inside {:?}",
                seeded.set.as_slice(),
                full.set.as_slice()
            ));
        }
        r.cases += 1;
    }
    r
}

/// G*∞(x) ≤ V*_0(x) for N ∈ {1, 5, 20}; the deviation is the largest excess.
pub fn ginf_below_finite(cases: usize, seed: u64) -> SuiteReport {
    let mut r = SuiteReport::new("G*inf <= V*_0(N), N in {1, 5, 20}", 1e-9);
    let mut g = rng(seed);
    for case in 0..cases {
        let model = random_mdp(&mut g, 8, 3);
        let q = random_subset(&mut g, model.num_states());
        let (gt, _) = value_iteration_ginf(&model, &q, 1e-12, 1_000_000).unwrap();
        let mut excess: f64 = 0.0;
        for n in [1, 5, 20] {
            let (v, _) = dp_backward(&model, &q, n).unwrap();
            for (gx, vx) in gt.values.iter().zip(v.initial()) {
                excess = excess.max(gx - vx);
            }
        }
        r.deviation(case, excess.max(0.0));
        r.cases += 1;
    }
    r
}

fn one_d_model(density: Arc<dyn TransitionDensity>, lipschitz: f64) -> (ContinuousModel, Region) {
    let model = ContinuousModel::new(
        1,
        1,
        density,
        lipschitz,
        AxisBox::new(vec![0.0], vec![0.01]).unwrap(),
    )
    .unwrap();
    let region = Region::from_box(AxisBox::new(vec![0.0], vec![1.0]).unwrap());
    (model, region)
}

/// Largest |V_k(q_i) − V̂_k(q_i)| / (τ_k δ) over cells and steps.
fn grid_error_ratio(abs: &Abstraction, n: usize, exact: impl Fn(usize, f64) -> f64) -> (f64, f64) {
    let (v, _) = dp_backward(&abs.model, &abs.cells(), n).unwrap();
    let err = ErrorModel {
        volume: abs.volume,
        lipschitz: abs.lipschitz,
        delta: abs.delta,
        horizon: n,
    };
    let mut worst_ratio: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for k in 0..=n {
        let bound = err.tau(k) * err.delta;
        for c in 0..abs.states.len() {
            let q = abs.states.representative(c)[0];
            let gap = (exact(k, q) - v.values[k][c]).abs();
            worst_gap = worst_gap.max(gap);
            let ratio = if bound > 0.0 {
                gap / bound
            } else if gap <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            worst_ratio = worst_ratio.max(ratio);
        }
    }
    (worst_ratio, worst_gap)
}

/// |V_k − V̂_k| ≤ τ_k δ at three grid levels, for the uniform density (exact
/// V_k = (½)^{N−k}, L = 0) and the tilted density with closed-form affine
/// values. The deviation is the worst ratio gap / (τ_k δ); tolerance 1.
pub fn grid_error_bound(n: usize) -> SuiteReport {
    let mut r = SuiteReport::new("grid error bound |V - V^| <= tau_k delta", 1.0);
    let tilted = TiltedUniform { gamma: 2.0 };
    let coeffs = tilted.exact_values(n);
    for (idx, delta) in [0.1, 0.05, 0.025].into_iter().enumerate() {
        let (m, q) = one_d_model(Arc::new(Uniform), 0.0);
        let abs = abstract_model(&m, &q, &GridSpec::Delta(delta)).unwrap();
        let (ratio, _) = grid_error_ratio(&abs, n, |k, _| 0.5f64.powi((n - k) as i32));
        r.deviation(idx, ratio);
        r.cases += 1;

        let (m, q) = one_d_model(Arc::new(tilted), tilted.lipschitz());
        let abs = abstract_model(&m, &q, &GridSpec::Delta(delta)).unwrap();
        let (ratio, _) = grid_error_ratio(&abs, n, |k, x| coeffs[k].0 + coeffs[k].1 * (x - 0.5));
        r.deviation(idx + 3, ratio);
        r.cases += 1;
    }
    r
}
