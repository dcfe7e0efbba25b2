use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, RngSeed};
use rand::SeedableRng;
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

use pcis_core::model::{
    normal_cdf, restrict, AxisBox, ContinuousModel, LinearDynamics, Noise, NoiseKind,
};
use pcis_testkit::gen::{random_mdp, random_sub_of, random_subset};

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_algorithm: RngAlgorithm::ChaCha,
        rng_seed: RngSeed::Fixed(7),
        failure_persistence: None,
        ..Config::default()
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn kernel_rows_sum_to_one(seed in any::<u64>()) {
        let model = random_mdp(&mut ChaCha8Rng::seed_from_u64(seed), 8, 3);
        for x in 0..model.num_states() {
            for (_, row) in model.rows_of(x) {
                prop_assert!((row.mass() - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn restriction_is_monotone_in_the_subset(seed in any::<u64>()) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let model = random_mdp(&mut g, 8, 3);
        let big = random_subset(&mut g, model.num_states());
        let small = random_sub_of(&mut g, &big);
        prop_assume!(!small.is_empty());
        let rb = restrict(&model, &big).unwrap();
        let rs = restrict(&model, &small).unwrap();
        for (ls, x) in small.iter().enumerate() {
            let lb = rb.local_index(x).unwrap();
            for ((a1, row_s), (a2, row_b)) in rs.rows(ls).iter().zip(rb.rows(lb)) {
                prop_assert_eq!(a1, a2);
                let ms: f64 = row_s.iter().map(|e| e.1).sum();
                let mb: f64 = row_b.iter().map(|e| e.1).sum();
                prop_assert!(ms <= mb + 1e-15);
                prop_assert!(mb <= 1.0 + 1e-9);
            }
        }
    }
}

fn sample_moments(model: &ContinuousModel, x: &[f64], u: &[f64], n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let dim = x.len();
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    for _ in 0..n {
        let y = model.sample(x, u, &mut rng).unwrap();
        for i in 0..dim {
            sum[i] += y[i];
            sq[i] += y[i] * y[i];
        }
    }
    (0..dim)
        .map(|i| {
            let m = sum[i] / n as f64;
            (m, sq[i] / n as f64 - m * m)
        })
        .collect()
}

#[test]
fn gaussian_sampler_mean_within_four_standard_errors() {
    let sigma = 1.0 / 30.0;
    let dynamics = LinearDynamics {
        a: vec![vec![1.6, 1.1], vec![-0.7, 1.2]],
        b: vec![vec![1.0], vec![1.0]],
        c: vec![0.05, -0.02],
        noise: Noise {
            kind: NoiseKind::Gaussian,
            sigma,
            truncation: None,
        },
    };
    let model = ContinuousModel::linear(dynamics, None, AxisBox::from_bounds(&[[-1.0, 1.0]]).unwrap())
        .unwrap();
    let (x, u) = ([0.2, -0.1], [0.25]);
    let expected = [1.6 * 0.2 - 1.1 * 0.1 + 0.25 + 0.05, -0.7 * 0.2 - 1.2 * 0.1 + 0.25 - 0.02];
    let n = 100_000;
    for (i, (m, _)) in sample_moments(&model, &x, &u, n).into_iter().enumerate() {
        let se = sigma / (n as f64).sqrt();
        assert!((m - expected[i]).abs() <= 4.0 * se, "axis {i}: {m} vs {}", expected[i]);
    }
}

#[test]
fn truncated_sampler_mean_and_variance() {
    let (sigma, t) = (0.5, 0.6);
    let dynamics = LinearDynamics {
        a: vec![vec![0.9]],
        b: vec![vec![1.0]],
        c: vec![1.5],
        noise: Noise {
            kind: NoiseKind::TruncatedGaussian,
            sigma,
            truncation: Some(t),
        },
    };
    let model = ContinuousModel::linear(dynamics, None, AxisBox::from_bounds(&[[-2.0, 2.0]]).unwrap())
        .unwrap();
    // Variance of N(0, σ²) truncated to [−t, t].
    let beta = t / sigma;
    let phi = (-0.5 * beta * beta).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let z = 2.0 * normal_cdf(beta) - 1.0;
    let var = sigma * sigma * (1.0 - 2.0 * beta * phi / z);
    let n = 100_000;
    let (m, v) = sample_moments(&model, &[25.0], &[-0.5], n)[0];
    let expected = 0.9 * 25.0 - 0.5 + 1.5;
    assert!((m - expected).abs() <= 4.0 * (var / n as f64).sqrt(), "{m} vs {expected}");
    assert!((v - var).abs() <= 0.02 * var, "{v} vs {var}");
}
