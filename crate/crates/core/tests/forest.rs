mod common;

use common::{oracle_split, random_small_dataset};
use polylab::data::{gen_gaussian_xor, Dataset};
use polylab::forest::{train_forest, train_tree, ForestParams, TreeNode};
use polylab::seed;
use proptest::prelude::*;
use rand::Rng;

fn root_split(tree: &TreeNode) -> Option<(usize, f64)> {
    match tree {
        TreeNode::Internal {
            feature, threshold, ..
        } => Some((*feature, *threshold)),
        TreeNode::Leaf { .. } => None,
    }
}

#[test]
fn split_choice_matches_exhaustive_search() {
    let mut rng = seed::rng(2024);
    for case in 0..200 {
        let ds = random_small_dataset(&mut rng);
        let tree = train_tree(&ds, ds.dim(), case).unwrap();
        assert_eq!(root_split(&tree), oracle_split(&ds), "case {case}: {ds:?}");
    }
}

fn xor_forest(trees: usize) -> (polylab::forest::ForestModel, Dataset) {
    let (train, test) = gen_gaussian_xor(300, 200, 0.5, 5).unwrap();
    (
        train_forest(&train, &ForestParams::new(trees, 1), 17).unwrap(),
        test,
    )
}

/// Leaf boxes of a tree and the interval bookkeeping along each path.
#[test]
fn every_point_lands_in_exactly_one_leaf_box() {
    let (forest, _) = xor_forest(10);
    let mut rng = seed::rng(7);
    for tree in &forest.trees {
        let boxes = tree.leaf_boxes(2);
        assert_eq!(boxes.len(), tree.leaf_count());
        for _ in 0..1000 {
            let x = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let hits: Vec<_> = boxes.iter().filter(|b| b.contains(&x)).collect();
            assert_eq!(hits.len(), 1);
            assert_eq!(hits[0].cell_id, tree.cell_id(&x));
        }
    }
}

#[test]
fn forest_posterior_is_the_mean_of_tree_posteriors() {
    let (forest, test) = xor_forest(25);
    for x in test.rows() {
        let p = forest.posterior(x).unwrap();
        for k in 0..2 {
            let mean: f64 =
                forest.trees.iter().map(|t| t.posterior(x)[k]).sum::<f64>() / forest.trees.len() as f64;
            assert!((p[k] - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn tree_order_does_not_change_the_posterior() {
    let (forest, test) = xor_forest(25);
    let mut reversed = forest.clone();
    reversed.trees.reverse();
    for x in test.rows() {
        let a = forest.posterior(x).unwrap();
        let b = reversed.posterior(x).unwrap();
        for k in 0..2 {
            assert!((a[k] - b[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn training_is_seed_deterministic() {
    let (train, _) = gen_gaussian_xor(200, 1, 0.5, 3).unwrap();
    let p = ForestParams::new(20, 1);
    assert_eq!(train_forest(&train, &p, 9).unwrap(), train_forest(&train, &p, 9).unwrap());
    assert_ne!(train_forest(&train, &p, 9).unwrap(), train_forest(&train, &p, 10).unwrap());
}

#[test]
fn model_survives_json() {
    let (forest, test) = xor_forest(5);
    let back: polylab::forest::ForestModel =
        serde_json::from_str(&serde_json::to_string(&forest).unwrap()).unwrap();
    assert_eq!(back, forest);
    let x = test.row(0);
    assert_eq!(back.posterior(x).unwrap(), forest.posterior(x).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_property_on_random_points(xs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 200)) {
        let (forest, _) = xor_forest(3);
        for tree in &forest.trees {
            let boxes = tree.leaf_boxes(2);
            for &(a, b) in &xs {
                let x = [a, b];
                prop_assert_eq!(boxes.iter().filter(|bx| bx.contains(&x)).count(), 1);
                prop_assert_eq!(tree.path(&x).len() <= tree.depth(), true);
            }
        }
    }
}
