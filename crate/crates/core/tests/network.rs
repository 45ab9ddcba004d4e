mod common;

use common::{gradient_check, random_gradient_case, random_net};
use polylab::data::{gen_gaussian_xor, Dataset};
use polylab::network::{
    random_search, softmax, train, train_with_report, NetworkModel, SearchSpace, TrainConfig,
};
use polylab::seed;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn analytic_gradients_match_central_differences() {
    let mut rng = seed::rng(99);
    let mut checked = 0;
    while checked < 50 {
        let (m, ds, l2) = random_gradient_case(&mut rng);
        if let Some(err) = gradient_check(&m, &ds, l2, 1e-5) {
            assert!(err < 1e-4, "relative error {err}");
            checked += 1;
        }
    }
}

#[test]
fn two_by_two_forward_composes_relus() {
    // x -> relu(W1 x + b1) -> relu(W2 h + b2) -> logits
    let mut m = NetworkModel::zeros(&[2, 2, 2, 2]).unwrap();
    m.weights[0] = vec![1.0, -1.0, 2.0, 0.5];
    m.biases[0] = vec![0.0, 0.25];
    m.weights[1] = vec![1.0, 1.0, -1.0, 2.0];
    m.biases[1] = vec![-0.5, 0.0];
    m.weights[2] = vec![1.0, 0.0, 0.0, 1.0];
    let x = [0.5, -0.25];
    let h1 = [
        (0.5 * 1.0 + -0.25 * 2.0 + 0.0f64).max(0.0),
        (0.5 * -1.0 + -0.25 * 0.5 + 0.25f64).max(0.0),
    ];
    let h2 = [
        (h1[0] * 1.0 + h1[1] * -1.0 - 0.5f64).max(0.0),
        (h1[0] * 1.0 + h1[1] * 2.0 + 0.0f64).max(0.0),
    ];
    let f = m.forward(&x).unwrap();
    for k in 0..2 {
        assert!((f.activations[1][k] - h2[k]).abs() < 1e-15);
        assert!((f.logits[k] - h2[k]).abs() < 1e-15);
    }
}

#[test]
fn training_is_seed_deterministic() {
    let (ds, _) = gen_gaussian_xor(300, 1, 0.5, 1).unwrap();
    let cfg = TrainConfig {
        max_epochs: 20,
        seed: 4,
        ..TrainConfig::default()
    };
    assert_eq!(train(&ds, &[16], &cfg).unwrap(), train(&ds, &[16], &cfg).unwrap());
}

#[test]
fn early_stopping_restores_the_best_epoch() {
    let (ds, _) = gen_gaussian_xor(400, 1, 0.5, 2).unwrap();
    let cfg = TrainConfig {
        max_epochs: 200,
        seed: 1,
        ..TrainConfig::default()
    };
    let report = train_with_report(&ds, &[32], &cfg).unwrap();
    assert!(report.epochs_run <= 200);
    // epochs count from one
    assert!(report.best_epoch >= 1 && report.best_epoch <= report.epochs_run);
    assert_eq!(report.history.len(), report.epochs_run);
    let best = report.history[report.best_epoch - 1].validation_loss;
    assert!(report.history.iter().all(|e| e.validation_loss >= best));
    assert!(!report.validated_on_train);
}

#[test]
fn tiny_datasets_fall_back_to_training_loss() {
    let ds = Dataset::new("tiny", vec![0.0, 1.0, 0.0, 1.0], 2, vec![0, 1], 2).unwrap();
    let cfg = TrainConfig {
        max_epochs: 5,
        ..TrainConfig::default()
    };
    assert!(train_with_report(&ds, &[4], &cfg).unwrap().validated_on_train);
}

#[test]
fn search_is_deterministic_and_logs_every_draw() {
    let (ds, _) = gen_gaussian_xor(200, 1, 0.5, 3).unwrap();
    let space = SearchSpace {
        draws: 3,
        width_max: 40,
        ..SearchSpace::default()
    };
    let base = TrainConfig {
        max_epochs: 10,
        ..TrainConfig::default()
    };
    let a = random_search(&ds, &space, 3, &base, 5).unwrap();
    let b = random_search(&ds, &space, 3, &base, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.log.len(), 3);
    let best = a.log.iter().map(|e| e.score()).fold(f64::NEG_INFINITY, f64::max);
    let chosen = a.log.iter().find(|e| e.arch == a.arch && e.l2 == a.l2).unwrap();
    assert_eq!(chosen.score(), best);
}

#[test]
fn l2_draws_are_log_uniform() {
    // Kolmogorov-Smirnov distance of log10(l2) against U(-5, -2)
    let space = SearchSpace::default();
    let mut rng = seed::rng(12);
    let mut logs: Vec<f64> = (0..10_000).map(|_| space.sample(&mut rng).1.log10()).collect();
    logs.sort_by(f64::total_cmp);
    let n = logs.len() as f64;
    let ks = logs
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let cdf = (v + 5.0) / 3.0;
            (cdf - i as f64 / n).abs().max((cdf - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "KS distance {ks}");
}

#[test]
fn architectures_stay_in_the_search_space() {
    let space = SearchSpace::default();
    let mut rng = seed::rng(3);
    for _ in 0..1000 {
        let (arch, l2) = space.sample(&mut rng);
        assert!((1..=3).contains(&arch.len()));
        assert!(arch.iter().all(|w| (20..=400).contains(w)));
        assert!(l2 >= 1e-5 * (1.0 - 1e-12) && l2 <= 1e-2 * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_is_a_shift_invariant_distribution(
        // spreads beyond ~36 round the largest probability to exactly 1
        logits in prop::collection::vec(-15.0f64..15.0, 2..8),
        shift in -100.0f64..100.0,
    ) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn logits_are_affine_between_points_with_one_pattern(seed_value in any::<u64>()) {
        let mut rng = seed::rng(seed_value);
        let m = random_net(&mut rng, &[6, 6]);
        let pattern = |x: &[f64]| -> Vec<bool> {
            m.forward(x).unwrap().pre_activations.iter().flatten().map(|&z| z > 0.0).collect()
        };
        let a = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        // shrink the second point towards the first until the patterns agree
        let mut b = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let mut tries = 0;
        while pattern(&a) != pattern(&b) && tries < 60 {
            b = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            tries += 1;
        }
        prop_assume!(pattern(&a) == pattern(&b));
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let (la, lb, lm) = (
            m.forward(&a).unwrap().logits,
            m.forward(&b).unwrap().logits,
            m.forward(&mid).unwrap().logits,
        );
        for k in 0..2 {
            prop_assert!((lm[k] - (la[k] + lb[k]) / 2.0).abs() < 1e-9);
        }
    }
}
