use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pcis_core::discretize::{approx_finite_pcis, ErrorModel, GridSpec};
use pcis_core::examples::thermal;
use pcis_core::finite_horizon::{dp_backward, Horizon, ResultPolicy};
use pcis_core::infinite_horizon::{largest_infinite_pcis, InfiniteMethod};
use pcis_core::model::{DiscreteModelBuilder, StateSet};
use pcis_core::sim::{simulate_continuous, simulate_discrete, Check, SimOptions, SimReport, Verdict};
use pcis_testkit::gen::{random_mdp, random_subset};

fn opts(seed: u64) -> SimOptions {
    SimOptions {
        trials: 100_000,
        seed,
        ..SimOptions::default()
    }
}

/// Exact finite-horizon values checked by rollouts on random models. Each
/// 99% interval misses with probability about 1%, so a handful of misses
/// across all checks is expected.
#[test]
fn rollouts_match_exact_finite_values() {
    let mut g = ChaCha8Rng::seed_from_u64(41);
    let (mut checks, mut misses) = (0, 0);
    for case in 0..8 {
        let model = random_mdp(&mut g, 6, 3);
        let q = random_subset(&mut g, model.num_states());
        let n = 1 + case % 4;
        let (v, policy) = dp_backward(&model, &q, n).unwrap();
        let mut computed = vec![None; model.num_states()];
        for (i, x) in q.iter().enumerate() {
            computed[x] = Some(v.initial()[i]);
        }
        let x0: Vec<usize> = q.iter().collect();
        let report = simulate_discrete(
            &model,
            &ResultPolicy::Markov(policy),
            &q,
            &x0,
            Horizon::Finite(n),
            &computed,
            &opts(case as u64),
        )
        .unwrap();
        assert_eq!(report.check, Check::TwoSided);
        for row in &report.rows {
            checks += 1;
            let p = row.computed_p.unwrap();
            assert!((row.empirical_p - p).abs() <= 2.0 * row.ci_halfwidth + 1e-12, "{row:?}");
            if row.verdict == Verdict::Fail {
                misses += 1;
            }
        }
    }
    assert!(checks >= 20);
    assert!(misses * 10 <= checks, "{misses} misses out of {checks}");
}

/// Stay counts strictly between 0 and `trials`, i.e. the ones a seed can move.
fn random_counts(report: &SimReport) -> Vec<u64> {
    report
        .rows
        .iter()
        .map(|r| r.stays)
        .filter(|&s| s > 0 && s < report.trials)
        .collect()
}

#[test]
fn reports_reproduce_and_seed_changes_keep_the_verdict() {
    let mut g = ChaCha8Rng::seed_from_u64(8);
    let model = random_mdp(&mut g, 6, 3);
    let q = StateSet::from_indices(0..model.num_states());
    let r = largest_infinite_pcis(&model, &q, 0.5, InfiniteMethod::Vi).unwrap();
    let x0: Vec<usize> = r.set.iter().collect();
    let run = |seed| {
        simulate_discrete(&model, &r.policy, &r.set, &x0, Horizon::Infinite, &r.probabilities, &opts(seed)).unwrap()
    };
    let a = run(1);
    assert_eq!(a, run(1));
    assert_eq!(a.check, Check::LowerBound);
    assert_eq!(a.steps, 10 * r.set.len());
    assert!(a.all_pass());
    let b = run(2);
    assert!(b.all_pass());
    if !random_counts(&a).is_empty() {
        assert_ne!(random_counts(&a), random_counts(&b));
    }

    // A leaky two-state chain: every start has a nondegenerate count.
    let mut bld = DiscreteModelBuilder::new(&["a", "b", "out"], &["go"]);
    bld.transition("a", "go", "b", 0.7).unwrap();
    bld.transition("a", "go", "out", 0.3).unwrap();
    bld.transition("b", "go", "a", 0.6).unwrap();
    bld.transition("b", "go", "out", 0.4).unwrap();
    bld.transition("out", "go", "out", 1.0).unwrap();
    let model = bld.build().unwrap();
    let q = StateSet::from_indices([0, 1]);
    let (v, policy) = dp_backward(&model, &q, 3).unwrap();
    let policy = ResultPolicy::Markov(policy);
    // Three steps alternate a, b, a (or b, a, b).
    assert!((v.initial()[0] - 0.7 * 0.6 * 0.7).abs() < 1e-12);
    assert!((v.initial()[1] - 0.6 * 0.7 * 0.6).abs() < 1e-12);
    let mut computed = vec![None; model.num_states()];
    for (i, x) in q.iter().enumerate() {
        computed[x] = Some(v.initial()[i]);
    }
    let x0: Vec<usize> = q.iter().collect();
    let run = |seed| simulate_discrete(&model, &policy, &q, &x0, Horizon::Finite(3), &computed, &opts(seed)).unwrap();
    let (a, b) = (run(3), run(4));
    assert_eq!(a, run(3));
    assert_eq!(random_counts(&a).len(), 2);
    assert_ne!(random_counts(&a), random_counts(&b));
    let verdicts = |r: &SimReport| r.rows.iter().map(|x| x.verdict).collect::<Vec<_>>();
    assert_eq!(verdicts(&a), verdicts(&b));
}

#[test]
fn thermal_rollouts_stay_within_the_grid_error() {
    let (m, q) = thermal().unwrap();
    let n = 10;
    let r = approx_finite_pcis(&m, &q, n, 0.9, &GridSpec::Delta(0.05), true).unwrap();
    let abs = &r.abstraction;
    let err = ErrorModel {
        volume: abs.volume,
        lipschitz: abs.lipschitz,
        delta: abs.delta,
        horizon: n,
    };
    let slack = err.tau0() * err.delta;
    let x0 = vec![vec![23.5], vec![25.0], vec![26.2], vec![27.6]];
    let report = simulate_continuous(
        &m,
        abs,
        &r.result.policy,
        &r.result.set,
        &x0,
        n,
        &r.result.probabilities,
        &SimOptions {
            slack,
            ..opts(5)
        },
    )
    .unwrap();
    for row in &report.rows {
        assert_eq!(row.verdict, Verdict::Pass, "{row:?}");
        assert!(row.empirical_p >= 0.9 - row.ci_halfwidth - slack);
    }
}
