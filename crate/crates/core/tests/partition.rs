mod common;

use std::collections::HashSet;

use common::random_net;
use polylab::data::gen_gaussian_xor;
use polylab::forest::{train_forest, ForestParams};
use polylab::partition::{
    enumerate_forest_regions_2d, enumerate_layers_2d, enumerate_regions_2d, label_grid, Box2,
    Partitioner, RegionCell,
};
use polylab::seed;
use proptest::prelude::*;
use rand::Rng;

fn domain() -> Box2 {
    Box2::new([-3.0, -3.0], [3.0, 3.0])
}

fn point(rng: &mut seed::Rng, d: &Box2) -> [f64; 2] {
    [
        rng.gen_range(d.min[0]..d.max[0]),
        rng.gen_range(d.min[1]..d.max[1]),
    ]
}

fn locate(cells: &[RegionCell], x: [f64; 2]) -> Vec<usize> {
    (0..cells.len()).filter(|&i| cells[i].contains_strictly(x)).collect()
}

#[test]
fn same_code_pairs_keep_their_code_at_the_midpoint() {
    let mut rng = seed::rng(31);
    for _ in 0..5 {
        let m = random_net(&mut rng, &[8, 8]);
        let d = domain();
        let pts: Vec<[f64; 2]> = (0..400).map(|_| point(&mut rng, &d)).collect();
        let codes: Vec<_> = pts.iter().map(|x| m.code(x, 2).unwrap()).collect();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if codes[i] == codes[j] {
                    let mid = [(pts[i][0] + pts[j][0]) / 2.0, (pts[i][1] + pts[j][1]) / 2.0];
                    assert_eq!(m.code(&mid, 2).unwrap(), codes[i]);
                }
            }
        }
    }
}

#[test]
fn exact_cells_tile_the_domain_and_carry_the_model_code() {
    let mut rng = seed::rng(8);
    for _ in 0..5 {
        let m = random_net(&mut rng, &[6, 5]);
        let d = domain();
        let cells = enumerate_regions_2d(&m, &d, 2).unwrap();
        let area: f64 = cells.iter().map(RegionCell::area).sum();
        assert!((area - 36.0).abs() < 1e-6, "areas sum to {area}");
        for _ in 0..2000 {
            let x = point(&mut rng, &d);
            let hits = locate(&cells, x);
            // a point on a boundary belongs to no open cell; random draws
            // essentially never land there
            assert_eq!(hits.len(), 1);
            assert_eq!(cells[hits[0]].code, m.code(&x, 2).unwrap());
        }
    }
}

#[test]
fn affine_maps_reproduce_hidden_activations() {
    let mut rng = seed::rng(19);
    let m = random_net(&mut rng, &[5, 4, 3]);
    let d = domain();
    let layers = enumerate_layers_2d(&m, &d, 3).unwrap();
    for (l, cells) in layers.iter().enumerate().skip(1) {
        for _ in 0..500 {
            let x = point(&mut rng, &d);
            let hit = locate(cells, x);
            let cell = &cells[hit[0]];
            let want = &m.forward(&x).unwrap().activations[l - 1];
            let got = cell.affine_map.apply(x);
            for (a, b) in got.iter().zip(want) {
                assert!((a - b).abs() < 1e-9, "layer {l}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn single_layer_counts_respect_the_arrangement_bound() {
    let mut rng = seed::rng(4);
    let wide = Box2::new([-100.0, -100.0], [100.0, 100.0]);
    for k in 1..=8 {
        let m = random_net(&mut rng, &[k]);
        let cells = enumerate_regions_2d(&m, &wide, 1).unwrap();
        assert!(cells.len() <= 1 + k + k * (k - 1) / 2, "k={k}: {}", cells.len());
    }
}

#[test]
fn forest_cells_are_axis_aligned_boxes() {
    let (train, _) = gen_gaussian_xor(200, 1, 0.5, 6).unwrap();
    let forest = train_forest(&train, &ForestParams::new(4, 1), 2).unwrap();
    let d = domain();
    let depth = forest.layer_depth().min(3);
    let cells = enumerate_forest_regions_2d(&forest, &d, depth).unwrap();
    let mut rng = seed::rng(1);
    for c in &cells {
        for h in &c.halfspaces {
            let n = h.normal;
            assert!(n[0] == 0.0 || n[1] == 0.0);
        }
        assert!(c.polygon.len() == 4);
    }
    for _ in 0..2000 {
        let x = point(&mut rng, &d);
        let hits = locate(&cells, x);
        assert_eq!(hits.len(), 1);
        assert_eq!(cells[hits[0]].code, forest.code(&x, depth).unwrap());
    }
}

#[test]
fn grid_codes_appear_in_the_exact_partition() {
    let mut rng = seed::rng(77);
    for _ in 0..3 {
        let m = random_net(&mut rng, &[5, 5]);
        let d = domain();
        let exact: HashSet<_> = enumerate_regions_2d(&m, &d, 2)
            .unwrap()
            .into_iter()
            .map(|c| c.code)
            .collect();
        let grid = label_grid(&m, &d, 64, 2).unwrap();
        assert!(grid.region_count() <= exact.len());
        assert!(grid.codes.iter().all(|c| exact.contains(c)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cells_are_convex(seed_value in any::<u64>()) {
        let mut rng = seed::rng(seed_value);
        let m = random_net(&mut rng, &[4, 4]);
        let d = domain();
        for c in enumerate_regions_2d(&m, &d, 2).unwrap() {
            // the polygon is counter-clockwise and every turn is a left turn
            let p = &c.polygon;
            for i in 0..p.len() {
                let (a, b, q) = (p[i], p[(i + 1) % p.len()], p[(i + 2) % p.len()]);
                let cross = (b[0] - a[0]) * (q[1] - b[1]) - (b[1] - a[1]) * (q[0] - b[0]);
                prop_assert!(cross >= -1e-9);
            }
            prop_assert!(c.contains_strictly(c.witness));
        }
    }
}
