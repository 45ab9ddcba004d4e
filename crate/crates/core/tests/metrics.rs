use polylab::metrics::{
    accuracy, calibration_bins, cohen_kappa, ece, kappa_from_labels, ConfusionMatrix,
};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (usize, Vec<usize>, Vec<usize>)> {
    (2usize..6, 1usize..80).prop_flat_map(|(c, n)| {
        (
            Just(c),
            prop::collection::vec(0..c, n),
            prop::collection::vec(0..c, n),
        )
    })
}

fn probs(c: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, c), n).prop_map(|rows| {
        rows.into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|v| v / s).collect()
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kappa_invariant_under_relabelling(
        (c, truth, preds) in instance(),
        shift in 1usize..5,
    ) {
        let perm = |y: usize| (y + shift) % c;
        let a = kappa_from_labels(&truth, &preds, c).unwrap();
        let t2: Vec<usize> = truth.iter().map(|&y| perm(y)).collect();
        let p2: Vec<usize> = preds.iter().map(|&y| perm(y)).collect();
        let b = kappa_from_labels(&t2, &p2, c).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn kappa_is_one_iff_no_errors((c, truth, preds) in instance()) {
        let cm = ConfusionMatrix::from_labels(&truth, &preds, c).unwrap();
        let k = cohen_kappa(&cm).unwrap();
        let perfect = truth == preds;
        if perfect && !k.degenerate {
            prop_assert!((k.value - 1.0).abs() < 1e-12);
        }
        if (k.value - 1.0).abs() < 1e-12 {
            prop_assert!(perfect);
        }
        // observed agreement is the accuracy
        let po = cm.trace() as f64 / cm.total() as f64;
        prop_assert!((accuracy(&preds, &truth).unwrap() - po).abs() < 1e-15);
    }

    #[test]
    fn ece_is_a_proportion(
        (p, truth) in (2usize..6, 1usize..60).prop_flat_map(|(c, n)| {
            (probs(c, n), prop::collection::vec(0..c, n))
        }),
    ) {
        let e = ece(&p, &truth, 40).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
        let bins = calibration_bins(&p, &truth, 40).unwrap();
        prop_assert_eq!(bins.bins.iter().map(|b| b.count).sum::<usize>(), truth.len());
        // one bin is the gap between mean accuracy and mean confidence,
        // which the binned sum can only exceed (triangle inequality)
        prop_assert!(ece(&p, &truth, 1).unwrap() <= e + 1e-12);
    }
}

#[test]
fn sharp_correct_predictions_have_zero_ece() {
    let p = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    assert_eq!(ece(&p, &[0, 1, 0], 40).unwrap(), 0.0);
}
