use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pcis_core::solver::{
    solve_lp, solve_milp, Backend, SolveStatus, SolverConfig, FEASIBILITY_TOLERANCE,
    INTEGRALITY_TOLERANCE,
};
use pcis_testkit::gen::{random_bounded_lp, random_milp};
use pcis_testkit::oracle::{assignment_enumeration, vertex_enumeration};

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_algorithm: RngAlgorithm::ChaCha,
        rng_seed: RngSeed::Fixed(11),
        failure_persistence: None,
        ..Config::default()
    }
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn lp_matches_vertex_enumeration(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let n = g.gen_range(1..=6);
        let lp = random_bounded_lp(&mut g, n, 8);
        let out = solve_lp(&lp);
        match (out.status, vertex_enumeration(&lp)) {
            (SolveStatus::Optimal, Some(v)) => {
                prop_assert!((out.objective - v).abs() <= 1e-6, "{} vs {v}", out.objective);
                prop_assert!(lp.max_violation(&out.values) <= FEASIBILITY_TOLERANCE);
            }
            (SolveStatus::Infeasible, None) => {}
            (s, v) => prop_assert!(false, "solver {s}, enumeration {v:?}"),
        }
    }

    #[test]
    fn milp_matches_assignment_enumeration(seed in any::<u64>()) {
        let milp = random_milp(&mut ChaCha8Rng::seed_from_u64(seed), 4, 2, 6);
        let out = solve_milp(&milp);
        match (out.status, assignment_enumeration(&milp)) {
            (SolveStatus::Optimal, Some(v)) => {
                prop_assert!((out.objective - v).abs() <= 1e-6, "{} vs {v}", out.objective);
                prop_assert!(milp.lp.max_violation(&out.values) <= FEASIBILITY_TOLERANCE);
                for &j in &milp.binaries {
                    let x = out.values[j];
                    prop_assert!(x.min(1.0 - x).abs() <= INTEGRALITY_TOLERANCE);
                }
            }
            (SolveStatus::Infeasible, None) => {}
            (s, v) => prop_assert!(false, "solver {s}, enumeration {v:?}"),
        }
    }

    #[test]
    fn positive_objective_scaling_keeps_the_point(
        seed in any::<u64>(),
        factor in prop::sample::select(vec![0.1, 0.5, 2.0, 3.0, 7.5, 64.0]),
    ) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let n = g.gen_range(1..=6);
        let lp = random_bounded_lp(&mut g, n, 8);
        let mut scaled = lp.clone();
        for c in &mut scaled.objective {
            *c *= factor;
        }
        let (a, b) = (solve_lp(&lp), solve_lp(&scaled));
        prop_assert_eq!(a.status, b.status);
        if a.status == SolveStatus::Optimal {
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-9, "{:?} vs {:?}", a.values, b.values);
            }
            prop_assert!((b.objective - factor * a.objective).abs() <= 1e-9 * factor.max(1.0) * (1.0 + a.objective.abs()));
        }
    }

    #[test]
    fn solves_are_deterministic(seed in any::<u64>()) {
        let milp = random_milp(&mut ChaCha8Rng::seed_from_u64(seed), 4, 2, 6);
        let (a, b) = (solve_milp(&milp), solve_milp(&milp));
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.values, b.values);
        prop_assert_eq!(a.nodes, b.nodes);
        prop_assert_eq!(a.pivots, b.pivots);
    }
}

#[test]
fn highs_backend_agrees_with_reference() {
    if !SolverConfig::highs_available() {
        return;
    }
    let reference = SolverConfig::with_backend(Backend::Reference);
    let highs = SolverConfig::with_backend(Backend::Highs);
    let mut g = ChaCha8Rng::seed_from_u64(99);
    for case in 0..100 {
        let milp = random_milp(&mut g, 4, 2, 6);
        let a = reference.solve_milp("case", &milp).unwrap();
        let b = highs.solve_milp("case", &milp).unwrap();
        assert_eq!(a.status, b.status, "case {case}");
        if a.is_optimal() {
            assert!((a.objective - b.objective).abs() <= 1e-6, "case {case}");
        }
        let a = reference.solve_lp("case", &milp.lp).unwrap();
        let b = highs.solve_lp("case", &milp.lp).unwrap();
        assert_eq!(a.status, b.status, "case {case}");
        if a.is_optimal() {
            assert!((a.objective - b.objective).abs() <= 1e-6, "case {case}");
        }
    }
}
