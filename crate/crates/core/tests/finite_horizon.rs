use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pcis_core::finite_horizon::{
    backward_reachable_set, dp_backward, is_finite_pcis, largest_finite_pcis,
    largest_finite_pcis_with, solve_finite_lp, FiniteMethod, ResultPolicy,
};
use pcis_core::model::{DiscreteModel, StateSet};
use pcis_core::solver::{Backend, SolverConfig};
use pcis_testkit::gen::{random_mdp, random_sub_of, random_subset};
use pcis_testkit::oracle::exhaustive_v0;

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_algorithm: RngAlgorithm::ChaCha,
        rng_seed: RngSeed::Fixed(23),
        failure_persistence: None,
        ..Config::default()
    }
}

/// States that some action sequence keeps inside `q` for `n` steps with
/// certainty: W_N = Q, W_k = {x ∈ Q : ∃u, T(W_{k+1}|x,u) = 1}.
fn sure_stay(model: &DiscreteModel, q: &StateSet, n: usize) -> StateSet {
    let mut w = q.clone();
    for _ in 0..n {
        let mask = w.mask(model.num_states());
        w = q
            .iter()
            .filter(|&x| model.rows_of(x).any(|(_, r)| r.mass_in(&mask) >= 1.0 - 1e-12))
            .collect();
    }
    w
}

proptest! {
    #![proptest_config(config(96))]

    #[test]
    fn dp_and_lp_agree(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mdp(&mut g, 8, 3);
        let q = random_subset(&mut g, model.num_states());
        let n = g.gen_range(1..=5);
        let (dp, _) = dp_backward(&model, &q, n).unwrap();
        let solver = SolverConfig::with_backend(Backend::Reference);
        let (lp, policy) = solve_finite_lp(&model, &q, n, &solver).unwrap();
        for (a, b) in dp.values.iter().flatten().zip(lp.values.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-7, "{a} vs {b}");
        }
        // The LP policy attains the recursion value at every (k, x).
        for k in 0..n {
            for (i, x) in q.iter().enumerate() {
                let a = policy.action(k, x).unwrap();
                let row = model.row_for(x, a).unwrap();
                let next: f64 = q.iter().enumerate().map(|(j, y)| row.prob_of(y) * dp.values[k + 1][j]).sum();
                prop_assert!((next - dp.values[k][i]).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn dp_matches_exhaustive_policy_search(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mdp(&mut g, 3, 2);
        let q = random_subset(&mut g, model.num_states());
        let n = g.gen_range(1..=3);
        let (dp, _) = dp_backward(&model, &q, n).unwrap();
        for (a, b) in dp.initial().iter().zip(exhaustive_v0(&model, &q, n)) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn value_table_is_monotone_and_policy_greedy(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mdp(&mut g, 8, 3);
        let q = random_subset(&mut g, model.num_states());
        let n = g.gen_range(1..=6);
        let (v, policy) = dp_backward(&model, &q, n).unwrap();
        prop_assert!(v.values[n].iter().all(|&x| x == 1.0));
        for k in 0..n {
            for (i, x) in q.iter().enumerate() {
                prop_assert!(v.values[k][i] >= 0.0);
                prop_assert!(v.values[k][i] <= v.values[k + 1][i] + 1e-15);
                let a = policy.action(k, x).unwrap();
                prop_assert!(model.actions_of(x).contains(&a));
                let best = model
                    .rows_of(x)
                    .map(|(_, r)| q.iter().enumerate().map(|(j, y)| r.prob_of(y) * v.values[k + 1][j]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                prop_assert!((best - v.values[k][i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn certainty_matches_set_recursion(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mdp(&mut g, 8, 3);
        let q = random_subset(&mut g, model.num_states());
        let n = g.gen_range(1..=5);
        let (v, _) = dp_backward(&model, &q, n).unwrap();
        prop_assert_eq!(backward_reachable_set(&v, 1.0), sure_stay(&model, &q, n));
        prop_assert_eq!(backward_reachable_set(&v, 0.0), q);
    }

    #[test]
    fn largest_pcis_shrinks_and_certifies(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mdp(&mut g, 8, 3);
        let q = random_subset(&mut g, model.num_states());
        let n = g.gen_range(1..=5);
        let eps = g.gen_range(0.0..1.0);
        let r = largest_finite_pcis(&model, &q, n, eps, FiniteMethod::Dp).unwrap();
        prop_assert!(r.set.is_subset(&q));
        prop_assert!(r.iterations <= q.len());
        let t = &r.trace;
        prop_assert_eq!(t[0], q.len());
        prop_assert!(t[..t.len() - 1].windows(2).all(|w| w[1] < w[0]));
        let last = t[t.len() - 1];
        prop_assert!(last == t[t.len() - 2] || last == 0);
        prop_assert!(is_finite_pcis(&model, &r.set, n, eps).unwrap());
        for x in r.set.iter() {
            prop_assert!(r.probability(x).unwrap() >= eps - 1e-12);
        }
        if r.set.is_empty() {
            prop_assert_eq!(&r.policy, &ResultPolicy::None);
        }
        // The LP route shrinks through the same sets.
        let solver = SolverConfig::with_backend(Backend::Reference);
        let lp = largest_finite_pcis_with(&model, &q, n, eps, FiniteMethod::Lp, &solver).unwrap();
        prop_assert_eq!(&lp.set, &r.set);
        prop_assert_eq!(&lp.trace, &r.trace);
    }

    #[test]
    fn values_grow_with_the_set(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mdp(&mut g, 8, 3);
        let p = random_subset(&mut g, model.num_states());
        let q = random_sub_of(&mut g, &p);
        prop_assume!(!q.is_empty());
        let n = g.gen_range(1..=5);
        let (vq, _) = dp_backward(&model, &q, n).unwrap();
        let (vp, _) = dp_backward(&model, &p, n).unwrap();
        for x in q.iter() {
            prop_assert!(vq.value(0, x).unwrap() <= vp.value(0, x).unwrap() + 1e-12);
        }
    }

    #[test]
    fn union_of_pcis_is_pcis(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mdp(&mut g, 8, 3);
        let k = model.num_states();
        let (q1, q2) = (random_subset(&mut g, k), random_subset(&mut g, k));
        let (n1, n2) = (g.gen_range(1..=5), g.gen_range(1..=5));
        let (e1, e2) = (g.gen_range(0.3..1.0), g.gen_range(0.3..1.0));
        let p1 = largest_finite_pcis(&model, &q1, n1, e1, FiniteMethod::Dp).unwrap().set;
        let p2 = largest_finite_pcis(&model, &q2, n2, e2, FiniteMethod::Dp).unwrap().set;
        prop_assert!(is_finite_pcis(&model, &p1.union(&p2), n1.min(n2), e1.min(e2)).unwrap());
    }

    #[test]
    fn largest_pcis_is_nonincreasing_in_horizon_and_epsilon(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mdp(&mut g, 8, 3);
        let q = random_subset(&mut g, model.num_states());
        let set = |n: usize, e: f64| largest_finite_pcis(&model, &q, n, e, FiniteMethod::Dp).unwrap().set;
        let e = g.gen_range(0.2..0.9);
        let by_n: Vec<StateSet> = [1, 2, 4, 8].iter().map(|&n| set(n, e)).collect();
        prop_assert!(by_n.windows(2).all(|w| w[1].is_subset(&w[0])));
        let by_e: Vec<StateSet> = [0.2, 0.5, 0.8, 0.95].iter().map(|&e| set(3, e)).collect();
        prop_assert!(by_e.windows(2).all(|w| w[1].is_subset(&w[0])));
    }
}
