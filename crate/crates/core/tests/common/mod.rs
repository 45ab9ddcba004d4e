//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use polylab::data::Dataset;
use polylab::network::{loss, loss_and_gradient, NetworkModel};
use polylab::seed;
use rand::Rng;

/// Cohen's kappa by pairwise counting: chance agreement is the fraction of
/// (truth_i, pred_j) pairs that agree.
pub fn kappa_oracle(truth: &[usize], preds: &[usize]) -> f64 {
    let n = truth.len() as f64;
    let mut agree = 0usize;
    for (t, p) in truth.iter().zip(preds) {
        if t == p {
            agree += 1;
        }
    }
    let mut pairs = 0usize;
    for t in truth {
        for p in preds {
            if t == p {
                pairs += 1;
            }
        }
    }
    let po = agree as f64 / n;
    let pe = pairs as f64 / (n * n);
    if pe >= 1.0 {
        0.0
    } else {
        (po - pe) / (1.0 - pe)
    }
}

/// ECE by scanning every bin over every sample.
pub fn ece_oracle(probs: &[Vec<f64>], truth: &[usize], bins: usize) -> f64 {
    let n = probs.len() as f64;
    let mut total = 0.0;
    for b in 0..bins {
        let lo = b as f64 / bins as f64;
        let hi = (b + 1) as f64 / bins as f64;
        let mut gap = 0.0;
        for (p, &y) in probs.iter().zip(truth) {
            let mut pred = 0;
            for k in 1..p.len() {
                if p[k] > p[pred] {
                    pred = k;
                }
            }
            let conf = p[pred];
            let inside = conf >= lo && (conf < hi || b == bins - 1);
            if inside {
                gap += f64::from(u8::from(pred == y)) - conf;
            }
        }
        total += gap.abs() / n;
    }
    total
}

/// Exhaustive best split by weighted Gini compared as exact fractions, ties
/// to the lowest feature and then the lowest threshold. `None` when no
/// split strictly lowers the impurity.
pub fn oracle_split(ds: &Dataset) -> Option<(usize, f64)> {
    let n = ds.len() as i128;
    let c = ds.class_count();
    let mut parent = vec![0i128; c];
    for &y in ds.labels() {
        parent[y] += 1;
    }
    // n * impurity = (n^2 - sum c^2) / n
    let parent_num = n * n - parent.iter().map(|v| v * v).sum::<i128>();
    let parent_den = n;
    let mut best: Option<(i128, i128, usize, f64)> = None;
    for f in 0..ds.dim() {
        let mut values: Vec<f64> = ds.rows().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let mut left = vec![0i128; c];
            let mut right = vec![0i128; c];
            for (i, r) in ds.rows().enumerate() {
                if r[f] <= t {
                    left[ds.label(i)] += 1;
                } else {
                    right[ds.label(i)] += 1;
                }
            }
            let nl: i128 = left.iter().sum();
            let nr: i128 = right.iter().sum();
            let gl = nl * nl - left.iter().map(|v| v * v).sum::<i128>();
            let gr = nr * nr - right.iter().map(|v| v * v).sum::<i128>();
            // gl/nl + gr/nr
            let num = gl * nr + gr * nl;
            let den = nl * nr;
            let better = match best {
                None => true,
                Some((bn, bd, _, _)) => num * bd < bn * den,
            };
            if better {
                best = Some((num, den, f, t));
            }
        }
    }
    let (num, den, f, t) = best?;
    (num * parent_den < parent_num * den).then_some((f, t))
}

pub fn random_small_dataset(rng: &mut seed::Rng) -> Dataset {
    let n = rng.gen_range(2..=12);
    let d = rng.gen_range(1..=4);
    let c = rng.gen_range(2..=3);
    // a coarse value grid makes ties between candidate splits common
    let features = (0..n * d).map(|_| f64::from(rng.gen_range(0..5u8))).collect();
    let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
    labels[0] = 0;
    labels[n - 1] = 1;
    Dataset::new("small", features, d, labels, c).unwrap()
}

/// A 2-D ReLU net with uniform weights in [-1, 1).
pub fn random_net(rng: &mut seed::Rng, hidden: &[usize]) -> NetworkModel {
    let mut widths = vec![2];
    widths.extend_from_slice(hidden);
    widths.push(2);
    let mut m = NetworkModel::zeros(&widths).unwrap();
    for w in m.weights.iter_mut().chain(m.biases.iter_mut()) {
        for v in w.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    m
}

fn param(m: &mut NetworkModel, layer: usize, is_bias: bool, i: usize) -> &mut f64 {
    if is_bias {
        &mut m.biases[layer][i]
    } else {
        &mut m.weights[layer][i]
    }
}

/// Largest relative error between the analytic gradient and central
/// differences, or `None` if a hidden pre-activation sits too close to a
/// kink for finite differences to be meaningful.
pub fn gradient_check(m: &NetworkModel, ds: &Dataset, l2: f64, step: f64) -> Option<f64> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    // every parameter moves a pre-activation by at most step * max|x|-ish;
    // demand a wide margin
    for x in ds.rows() {
        let f = m.forward(x).unwrap();
        for z in f.pre_activations.iter().flatten() {
            if z.abs() < 1e-3 {
                return None;
            }
        }
    }
    let (_, grads) = loss_and_gradient(m, ds, &idx, l2);
    let mut worst: f64 = 0.0;
    let mut probe = m.clone();
    for l in 0..m.weights.len() {
        for (is_bias, len) in [(false, m.weights[l].len()), (true, m.biases[l].len())] {
            for i in 0..len {
                let orig = *param(&mut probe, l, is_bias, i);
                *param(&mut probe, l, is_bias, i) = orig + step;
                let up = loss(&probe, ds, &idx, l2);
                *param(&mut probe, l, is_bias, i) = orig - step;
                let down = loss(&probe, ds, &idx, l2);
                *param(&mut probe, l, is_bias, i) = orig;
                let numeric = (up - down) / (2.0 * step);
                let analytic = if is_bias {
                    grads.biases[l][i]
                } else {
                    grads.weights[l][i]
                };
                let scale = analytic.abs().max(numeric.abs());
                if scale > 1e-7 {
                    worst = worst.max((analytic - numeric).abs() / scale);
                }
            }
        }
    }
    Some(worst)
}

/// A random tiny network and dataset for the gradient check.
pub fn random_gradient_case(rng: &mut seed::Rng) -> (NetworkModel, Dataset, f64) {
    let d = rng.gen_range(1..=3);
    let depth = rng.gen_range(1..=2);
    let c = rng.gen_range(2..=3);
    let mut widths = vec![d];
    for _ in 0..depth {
        widths.push(rng.gen_range(1..=4));
    }
    widths.push(c);
    let mut m = NetworkModel::zeros(&widths).unwrap();
    for w in m.weights.iter_mut().chain(m.biases.iter_mut()) {
        for v in w.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let n = rng.gen_range(2..=6);
    let features = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let labels = (0..n).map(|i| i % c).collect();
    let ds = Dataset::new("g", features, d, labels, c).unwrap();
    let l2 = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(1e-4..1e-1) };
    (m, ds, l2)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va * vb).sqrt()
}
