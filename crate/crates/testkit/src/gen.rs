//! Random instances.

use rand::seq::SliceRandom;
use rand::Rng;

use pcis_core::model::{DiscreteModel, StateSet};
use pcis_core::solver::{LinearProgram, MixedIntegerLinearProgram, Relation, Sense};

/// Random MDP with 1..=`max_states` states and 1..=`max_actions` actions.
///
/// Each state admits a random nonempty action subset. Rows are sparse random
/// distributions; about one in six is deterministic, so absorbing structure
/// and nonempty robust sets show up regularly.
pub fn random_mdp<R: Rng>(rng: &mut R, max_states: usize, max_actions: usize) -> DiscreteModel {
    let n = rng.gen_range(1..=max_states);
    let m = rng.gen_range(1..=max_actions);
    let states = (0..n).map(|i| format!("s{i}")).collect();
    let actions = (0..m).map(|i| format!("a{i}")).collect();
    let rows = (0..n)
        .map(|_| {
            let mut admissible: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.7)).collect();
            if admissible.is_empty() {
                admissible.push(rng.gen_range(0..m));
            }
            admissible
                .into_iter()
                .map(|a| (a, random_row(rng, n)))
                .collect()
        })
        .collect();
    DiscreteModel::from_rows(states, actions, rows)
        .and_then(DiscreteModel::checked)
        .expect("generated rows are stochastic")
}

fn random_row<R: Rng>(rng: &mut R, n: usize) -> Vec<(usize, f64)> {
    if rng.gen_bool(1.0 / 6.0) {
        return vec![(rng.gen_range(0..n), 1.0)];
    }
    let mut w = Vec::new();
    for y in 0..n {
        if rng.gen_bool(0.6) {
            w.push((y, rng.gen_range(0.05..1.0)));
        }
    }
    if w.is_empty() {
        w.push((rng.gen_range(0..n), 1.0));
    }
    let total: f64 = w.iter().map(|e| e.1).sum();
    for e in &mut w {
        e.1 /= total;
    }
    w
}

/// Random nonempty subset of `0..n`.
pub fn random_subset<R: Rng>(rng: &mut R, n: usize) -> StateSet {
    let mut v: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
    if v.is_empty() {
        v.push(rng.gen_range(0..n));
    }
    StateSet::from_indices(v)
}

/// Random subset of `set` (possibly empty).
pub fn random_sub_of<R: Rng>(rng: &mut R, set: &StateSet) -> StateSet {
    set.iter().filter(|_| rng.gen_bool(0.6)).collect()
}

fn random_coeffs<R: Rng>(rng: &mut R, n: usize) -> Vec<(usize, f64)> {
    let mut c = Vec::new();
    for j in 0..n {
        if rng.gen_bool(0.75) {
            let a = (rng.gen_range(-3.0..3.0f64) * 4.0).round() / 4.0;
            if a != 0.0 {
                c.push((j, a));
            }
        }
    }
    if c.is_empty() {
        c.push((rng.gen_range(0..n), 1.0));
    }
    c
}

/// Random LP over a finite box with `n_vars` variables and up to
/// `max_constraints` rows. Most instances are feasible by construction (the
/// rows are satisfied at a random box point); a few get arbitrary right-hand
/// sides.
pub fn random_bounded_lp<R: Rng>(rng: &mut R, n_vars: usize, max_constraints: usize) -> LinearProgram {
    let sense = *[Sense::Minimize, Sense::Maximize].choose(rng).unwrap();
    let mut lp = LinearProgram::new(sense);
    let mut anchor = Vec::with_capacity(n_vars);
    for j in 0..n_vars {
        let lo = rng.gen_range(-4..=0) as f64;
        let hi = lo + rng.gen_range(1..=6) as f64;
        let cost = (rng.gen_range(-5.0..5.0f64) * 2.0).round() / 2.0;
        lp.add_variable(format!("x{j}"), lo, hi, cost);
        anchor.push(rng.gen_range(lo..hi));
    }
    let arbitrary = rng.gen_bool(0.1);
    for i in 0..rng.gen_range(0..=max_constraints) {
        let coeffs = random_coeffs(rng, n_vars);
        let at: f64 = coeffs.iter().map(|&(j, a)| a * anchor[j]).sum();
        let roll = rng.gen_range(0..10);
        let (rel, rhs) = if roll == 0 {
            (Relation::Eq, at)
        } else if roll <= 5 {
            (Relation::Le, at + rng.gen_range(0.0..2.0))
        } else {
            (Relation::Ge, at - rng.gen_range(0.0..2.0))
        };
        let rhs = if arbitrary { rng.gen_range(-6.0..6.0) } else { rhs };
        lp.add_constraint(format!("r{i}"), coeffs, rel, rhs);
    }
    lp
}

/// Random MILP with up to `max_binaries` binaries and up to `max_continuous`
/// bounded continuous variables.
pub fn random_milp<R: Rng>(
    rng: &mut R,
    max_binaries: usize,
    max_continuous: usize,
    max_constraints: usize,
) -> MixedIntegerLinearProgram {
    let nb = rng.gen_range(1..=max_binaries);
    let nc = rng.gen_range(0..=max_continuous);
    let mut lp = random_bounded_lp(rng, nb + nc, max_constraints);
    for j in 0..nb {
        lp.lower[j] = 0.0;
        lp.upper[j] = 1.0;
        lp.names[j] = format!("b{j}");
    }
    MixedIntegerLinearProgram {
        lp,
        binaries: (0..nb).collect(),
    }
}
