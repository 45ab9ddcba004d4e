//! Fully connected ReLU classifier with a softmax head.
//!
//! Training minimises mean cross-entropy plus `l2 / 2 * ||W||^2` (weights
//! only) with mini-batch SGD and heavy-ball momentum. A stratified slice of
//! the training data drives early stopping and the best-validation
//! parameters are restored at the end.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{self, Dataset, Standardizer};
use crate::metrics::{self, argmax};
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("expected a {expected}-dimensional input, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
    #[error("{0}")]
    Data(String),
}

impl From<data::DataError> for NetworkError {
    fn from(e: data::DataError) -> Self {
        NetworkError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, NetworkError>;

/// Layer `l` maps width `widths[l]` to `widths[l + 1]`. `weights[l]` is
/// stored row-major with shape `widths[l] x widths[l + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub widths: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Output of a single forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub logits: Vec<f64>,
    /// Pre-activations of every hidden layer.
    pub pre_activations: Vec<Vec<f64>>,
    /// Post-ReLU values of every hidden layer.
    pub activations: Vec<Vec<f64>>,
}

impl NetworkModel {
    /// A network with every parameter zero.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(NetworkError::InvalidArgument(format!(
                "widths must hold at least two positive entries, got {widths:?}"
            )));
        }
        Ok(Self {
            widths: widths.to_vec(),
            weights: widths.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect(),
            biases: widths[1..].iter().map(|&w| vec![0.0; w]).collect(),
        })
    }

    /// Fan-in scaled uniform weights in `±sqrt(6 / fan_in)`, zero biases.
    pub fn init(widths: &[usize], seed: u64) -> Result<Self> {
        let mut m = Self::zeros(widths)?;
        let mut rng = seed::rng(seed);
        for (l, w) in m.weights.iter_mut().enumerate() {
            let bound = (6.0 / widths[l] as f64).sqrt();
            w.iter_mut().for_each(|v| *v = rng.gen_range(-bound..bound));
        }
        Ok(m)
    }

    pub fn dimension(&self) -> usize {
        self.widths[0]
    }

    pub fn class_count(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    pub fn hidden_layers(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    /// Check shape chaining and finiteness, e.g. after deserialisation.
    pub fn validate(&self) -> Result<()> {
        let fresh = Self::zeros(&self.widths)?;
        let shapes_ok = self.weights.len() == fresh.weights.len()
            && self.biases.len() == fresh.biases.len()
            && self.weights.iter().zip(&fresh.weights).all(|(a, b)| a.len() == b.len())
            && self.biases.iter().zip(&fresh.biases).all(|(a, b)| a.len() == b.len());
        if !shapes_ok {
            return Err(NetworkError::InvalidArgument("layer shapes do not chain".into()));
        }
        let finite = self
            .weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .all(|v| v.is_finite());
        if !finite {
            return Err(NetworkError::NonFinite);
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(NetworkError::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NetworkError::NonFinite);
        }
        Ok(())
    }

    /// `out = input * W_l + b_l` for one sample.
    pub(crate) fn affine(&self, l: usize, input: &[f64], out: &mut Vec<f64>) {
        let width = self.widths[l + 1];
        out.clear();
        out.extend_from_slice(&self.biases[l]);
        let w = &self.weights[l];
        for (i, &xi) in input.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &w[i * width..(i + 1) * width];
            for (o, &wij) in out.iter_mut().zip(row) {
                *o += xi * wij;
            }
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        self.check_input(x)?;
        let hidden = self.hidden_layers();
        let mut pre_activations = Vec::with_capacity(hidden);
        let mut activations = Vec::with_capacity(hidden);
        let mut input = x.to_vec();
        let mut z = Vec::new();
        for l in 0..self.layer_count() {
            self.affine(l, &input, &mut z);
            if l < hidden {
                let a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
                pre_activations.push(z.clone());
                activations.push(a.clone());
                input = a;
            }
        }
        Ok(Forward {
            logits: z,
            pre_activations,
            activations,
        })
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward(x)?.logits))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.predict_proba(x).map(|p| argmax(&p))
    }

    /// Number of active units per hidden layer at `x`.
    pub fn active_node_counts(&self, x: &[f64]) -> Result<Vec<usize>> {
        let f = self.forward(x)?;
        Ok(f
            .pre_activations
            .iter()
            .map(|z| z.iter().filter(|&&v| v > 0.0).count())
            .collect())
    }
}

pub fn forward(m: &NetworkModel, x: &[f64]) -> Result<Forward> {
    m.forward(x)
}

pub fn predict_proba(m: &NetworkModel, x: &[f64]) -> Result<Vec<f64>> {
    m.predict_proba(x)
}

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

// ---------------------------------------------------------------------------
// Loss and gradients

/// Same layout as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(m: &NetworkModel) -> Self {
        Self {
            weights: m.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: m.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}

// register tile of the two products below: rows x columns
const TR: usize = 4;
const TC: usize = 8;

/// `out[s, :] += sum_i x[s, i] * w[i, :]` with `i` ascending for every
/// element and zero inputs skipped.
#[inline(always)]
fn accumulate_xw(out: &mut [f64], x: &[f64], w: &[f64], b: usize, inw: usize, outw: usize) {
    let full_s = b / TR * TR;
    let full_j = outw / TC * TC;
    for s0 in (0..full_s).step_by(TR) {
        for j0 in (0..full_j).step_by(TC) {
            let mut acc = [[0.0; TC]; TR];
            for (r, a) in acc.iter_mut().enumerate() {
                a.copy_from_slice(&out[(s0 + r) * outw + j0..][..TC]);
            }
            for i in 0..inw {
                let wr: &[f64; TC] = w[i * outw + j0..][..TC].try_into().expect("tile");
                for (r, a) in acc.iter_mut().enumerate() {
                    let xi = x[(s0 + r) * inw + i];
                    for k in 0..TC {
                        a[k] += xi * wr[k];
                    }
                }
            }
            for (r, a) in acc.iter().enumerate() {
                out[(s0 + r) * outw + j0..][..TC].copy_from_slice(a);
            }
        }
        for s in s0..s0 + TR {
            for j in full_j..outw {
                let mut z = out[s * outw + j];
                for i in 0..inw {
                    let xi = x[s * inw + i];
                    if xi != 0.0 {
                        z += xi * w[i * outw + j];
                    }
                }
                out[s * outw + j] = z;
            }
        }
    }
    for s in full_s..b {
        for i in 0..inw {
            let xi = x[s * inw + i];
            if xi == 0.0 {
                continue;
            }
            for (zj, &wij) in out[s * outw..(s + 1) * outw].iter_mut().zip(&w[i * outw..(i + 1) * outw]) {
                *zj += xi * wij;
            }
        }
    }
}

/// `prev[s, i] = w[i, :] . d[s, :]` where the input of unit `i` was active
/// (input > 0 exactly where the pre-activation is > 0).
#[inline(always)]
fn backprop_delta(prev: &mut [f64], d: &[f64], x: &[f64], w: &[f64], b: usize, inw: usize, outw: usize) {
    const BLOCK: usize = 8;
    for s0 in (0..b).step_by(BLOCK) {
        let s1 = (s0 + BLOCK).min(b);
        for i in 0..inw {
            let row = &w[i * outw..(i + 1) * outw];
            for s in s0..s1 {
                if x[s * inw + i] > 0.0 {
                    prev[s * inw + i] = dot(row, &d[s * outw..(s + 1) * outw]);
                }
            }
        }
    }
}

/// `g[i, :] += sum_s x[s, i] * d[s, :]` with `s` ascending for every
/// element and zero inputs skipped.
#[inline(always)]
fn accumulate_xtd(g: &mut [f64], x: &[f64], d: &[f64], b: usize, inw: usize, outw: usize) {
    let full_i = inw / TR * TR;
    let full_j = outw / TC * TC;
    for i0 in (0..full_i).step_by(TR) {
        for j0 in (0..full_j).step_by(TC) {
            let mut acc = [[0.0; TC]; TR];
            for (r, a) in acc.iter_mut().enumerate() {
                a.copy_from_slice(&g[(i0 + r) * outw + j0..][..TC]);
            }
            for s in 0..b {
                let dr: &[f64; TC] = d[s * outw + j0..][..TC].try_into().expect("tile");
                for (r, a) in acc.iter_mut().enumerate() {
                    let xi = x[s * inw + i0 + r];
                    for k in 0..TC {
                        a[k] += xi * dr[k];
                    }
                }
            }
            for (r, a) in acc.iter().enumerate() {
                g[(i0 + r) * outw + j0..][..TC].copy_from_slice(a);
            }
        }
        for i in i0..i0 + TR {
            for j in full_j..outw {
                let mut v = g[i * outw + j];
                for s in 0..b {
                    let xi = x[s * inw + i];
                    if xi != 0.0 {
                        v += xi * d[s * outw + j];
                    }
                }
                g[i * outw + j] = v;
            }
        }
    }
    for i in full_i..inw {
        let grow = &mut g[i * outw..(i + 1) * outw];
        for s in 0..b {
            let xi = x[s * inw + i];
            if xi == 0.0 {
                continue;
            }
            for (gj, &dj) in grow.iter_mut().zip(&d[s * outw..(s + 1) * outw]) {
                *gj += xi * dj;
            }
        }
    }
}

/// Reusable buffers for batched forward/backward passes.
struct Workspace {
    /// `acts[l]` holds the batch input to layer `l`, row-major.
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    fn new(layers: usize) -> Self {
        Self {
            acts: vec![Vec::new(); layers + 1],
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }
}

fn l2_penalty(m: &NetworkModel) -> f64 {
    m.weights.iter().flatten().map(|w| w * w).sum::<f64>() / 2.0
}

/// Dot product with four interleaved partial sums, which vectorises without
/// reassociation by the compiler.
#[inline(always)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

// The kernels are compiled twice: a baseline build and, on x86-64, an AVX2
// build picked at run time. Neither uses FMA, so both round identically.

#[cfg(target_arch = "x86_64")]
fn has_avx2() -> bool {
    std::arch::is_x86_feature_detected!("avx2")
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
fn batch_forward_avx2(m: &NetworkModel, ds: &Dataset, batch: &[usize], ws: &mut Workspace) -> f64 {
    batch_forward_impl(m, ds, batch, ws)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
fn batch_backward_avx2(m: &NetworkModel, ds: &Dataset, batch: &[usize], ws: &mut Workspace, grads: &mut Gradients) {
    batch_backward_impl(m, ds, batch, ws, grads)
}

/// Mean cross-entropy of a batch; fills `ws.acts` for a following backward.
fn batch_forward(m: &NetworkModel, ds: &Dataset, batch: &[usize], ws: &mut Workspace) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { batch_forward_avx2(m, ds, batch, ws) };
    }
    batch_forward_impl(m, ds, batch, ws)
}

/// Accumulate mean-batch gradients of the cross-entropy into `grads`.
/// Requires `ws` filled by `batch_forward`.
fn batch_backward(m: &NetworkModel, ds: &Dataset, batch: &[usize], ws: &mut Workspace, grads: &mut Gradients) {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { batch_backward_avx2(m, ds, batch, ws, grads) };
    }
    batch_backward_impl(m, ds, batch, ws, grads)
}

#[inline(always)]
fn batch_forward_impl(m: &NetworkModel, ds: &Dataset, batch: &[usize], ws: &mut Workspace) -> f64 {
    let b = batch.len();
    let layers = m.layer_count();
    ws.acts[0].clear();
    for &i in batch {
        ws.acts[0].extend_from_slice(ds.row(i));
    }
    for l in 0..layers {
        let (inw, outw) = (m.widths[l], m.widths[l + 1]);
        let (head, tail) = ws.acts.split_at_mut(l + 1);
        let input = &head[l];
        let out = &mut tail[0];
        out.clear();
        out.reserve(b * outw);
        let w = &m.weights[l];
        for _ in 0..b {
            out.extend_from_slice(&m.biases[l]);
        }
        accumulate_xw(out, input, w, b, inw, outw);
        if l + 1 < layers {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
    // softmax in place over the logits
    let c = m.class_count();
    let logits = &mut ws.acts[layers];
    let mut loss = 0.0;
    for (s, &i) in batch.iter().enumerate() {
        let row = &mut logits[s * c..(s + 1) * c];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
        loss -= row[ds.label(i)].max(f64::MIN_POSITIVE).ln();
    }
    loss / b as f64
}

#[inline(always)]
fn batch_backward_impl(
    m: &NetworkModel,
    ds: &Dataset,
    batch: &[usize],
    ws: &mut Workspace,
    grads: &mut Gradients,
) {
    let b = batch.len();
    let layers = m.layer_count();
    let c = m.class_count();
    ws.delta.clear();
    ws.delta.extend_from_slice(&ws.acts[layers]);
    for (s, &i) in batch.iter().enumerate() {
        ws.delta[s * c + ds.label(i)] -= 1.0;
    }
    let scale = 1.0 / b as f64;
    ws.delta.iter_mut().for_each(|d| *d *= scale);

    for l in (0..layers).rev() {
        let (inw, outw) = (m.widths[l], m.widths[l + 1]);
        let input = &ws.acts[l];
        let gw = &mut grads.weights[l];
        let gb = &mut grads.biases[l];
        for s in 0..b {
            for (g, &d) in gb.iter_mut().zip(&ws.delta[s * outw..(s + 1) * outw]) {
                *g += d;
            }
        }
        accumulate_xtd(gw, input, &ws.delta, b, inw, outw);
        if l == 0 {
            break;
        }
        let w = &m.weights[l];
        ws.delta_prev.clear();
        ws.delta_prev.resize(b * inw, 0.0);
        backprop_delta(&mut ws.delta_prev, &ws.delta, input, w, b, inw, outw);
        std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
    }
}

/// Regularised loss and its exact gradient over the rows `indices`.
pub fn loss_and_gradient(
    m: &NetworkModel,
    ds: &Dataset,
    indices: &[usize],
    l2: f64,
) -> (f64, Gradients) {
    let mut ws = Workspace::new(m.layer_count());
    let mut grads = Gradients::zeros_like(m);
    let ce = batch_forward(m, ds, indices, &mut ws);
    batch_backward(m, ds, indices, &mut ws, &mut grads);
    for (g, w) in grads.weights.iter_mut().zip(&m.weights) {
        for (gi, wi) in g.iter_mut().zip(w) {
            *gi += l2 * wi;
        }
    }
    (ce + l2 * l2_penalty(m), grads)
}

/// Regularised loss only.
pub fn loss(m: &NetworkModel, ds: &Dataset, indices: &[usize], l2: f64) -> f64 {
    let mut ws = Workspace::new(m.layer_count());
    batch_forward(m, ds, indices, &mut ws) + l2 * l2_penalty(m)
}

fn mean_cross_entropy(m: &NetworkModel, ds: &Dataset, indices: &[usize], ws: &mut Workspace) -> f64 {
    let mut total = 0.0;
    for chunk in indices.chunks(256) {
        total += batch_forward(m, ds, chunk, ws) * chunk.len() as f64;
    }
    total / indices.len() as f64
}

// ---------------------------------------------------------------------------
// Training

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub l2: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Train on z-scored inputs and fold the scaling back into the first
    /// layer, so the returned model still takes raw inputs.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 64,
            l2: 1e-4,
            max_epochs: 200,
            patience: 3,
            validation_fraction: 0.1,
            seed: 0,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(NetworkError::InvalidArgument(msg.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be a non-negative real");
        }
        if self.patience > self.max_epochs {
            return bad("patience must not exceed max_epochs");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopSignal {
    Improved,
    Continue,
    Stop,
}

/// Patience-based early stopping on a loss sequence. Epochs are 1-based.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopSignal {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            StopSignal::Improved
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                StopSignal::Stop
            } else {
                StopSignal::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: NetworkModel,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
    /// Set when the dataset was too small to hold out a validation split and
    /// early stopping watched the training loss instead.
    pub validated_on_train: bool,
}

/// Stratified hold-out: `round(fraction * n_c)` rows per class, leaving at
/// least one training row per class.
fn validation_split(ds: &Dataset, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seed::rng(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for mut members in ds.class_members() {
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let want = (fraction * members.len() as f64 + 0.5).floor() as usize;
        let take = want.min(members.len() - 1);
        val.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

pub fn train(ds: &Dataset, hidden: &[usize], cfg: &TrainConfig) -> Result<NetworkModel> {
    train_with_report(ds, hidden, cfg).map(|r| r.model)
}

/// Rewrite the first layer so that `model(x)` equals the trained
/// `model((x - mean) / scale)`.
fn fold_scaling(model: &mut NetworkModel, s: &Standardizer) {
    let out = model.biases[0].len();
    for (i, (&m, &sc)) in s.mean.iter().zip(&s.scale).enumerate() {
        for j in 0..out {
            let w = &mut model.weights[0][i * out + j];
            *w /= sc;
            model.biases[0][j] -= *w * m;
        }
    }
}

pub fn train_with_report(ds: &Dataset, hidden: &[usize], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if hidden.iter().any(|&w| w == 0) {
        return Err(NetworkError::InvalidArgument("hidden widths must be >= 1".into()));
    }
    if ds.class_histogram().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(NetworkError::InvalidArgument("training data needs two classes".into()));
    }
    let scaler = cfg.standardize.then(|| Standardizer::fit(ds));
    let scaled;
    let ds = match &scaler {
        Some(s) => {
            scaled = s.apply(ds);
            &scaled
        }
        None => ds,
    };
    let mut widths = vec![ds.dim()];
    widths.extend_from_slice(hidden);
    widths.push(ds.class_count());

    let mut model = NetworkModel::init(&widths, seed::substream(cfg.seed, "init", 0))?;
    let (mut train_idx, mut val_idx) =
        validation_split(ds, cfg.validation_fraction, seed::substream(cfg.seed, "validation", 0));
    let validated_on_train = val_idx.is_empty();
    if validated_on_train {
        val_idx = train_idx.clone();
    }

    let mut shuffle_rng = seed::rng(seed::substream(cfg.seed, "shuffle", 0));
    let mut velocity = Gradients::zeros_like(&model);
    let mut grads = Gradients::zeros_like(&model);
    let mut ws = Workspace::new(model.layer_count());
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut history = Vec::new();
    let mut epochs_run = 0;

    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        train_idx.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            grads.clear();
            let ce = batch_forward(&model, ds, batch, &mut ws);
            if !ce.is_finite() {
                return Err(NetworkError::TrainingDiverged { epoch });
            }
            epoch_loss += ce * batch.len() as f64;
            batch_backward(&model, ds, batch, &mut ws, &mut grads);
            sgd_step(&mut model, &grads, &mut velocity, cfg);
        }
        let train_loss = epoch_loss / train_idx.len() as f64 + cfg.l2 * l2_penalty(&model);
        let val_loss = mean_cross_entropy(&model, ds, &val_idx, &mut ws);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(NetworkError::TrainingDiverged { epoch });
        }
        history.push(EpochStats {
            train_loss,
            validation_loss: val_loss,
        });
        match stopper.observe(epoch, val_loss) {
            StopSignal::Improved => best.clone_from(&model),
            StopSignal::Continue => {}
            StopSignal::Stop => break,
        }
    }
    if let Some(s) = &scaler {
        fold_scaling(&mut best, s);
    }
    Ok(TrainReport {
        model: best,
        epochs_run,
        best_epoch: stopper.best_epoch(),
        history,
        validated_on_train,
    })
}

/// `v = momentum * v + (g + l2 * w)`, `w -= lr * v`.
fn sgd_step(m: &mut NetworkModel, g: &Gradients, v: &mut Gradients, cfg: &TrainConfig) {
    for l in 0..m.layer_count() {
        for ((w, &gw), vw) in m.weights[l].iter_mut().zip(&g.weights[l]).zip(&mut v.weights[l]) {
            *vw = cfg.momentum * *vw + gw + cfg.l2 * *w;
            *w -= cfg.learning_rate * *vw;
        }
        for ((b, &gb), vb) in m.biases[l].iter_mut().zip(&g.biases[l]).zip(&mut v.biases[l]) {
            *vb = cfg.momentum * *vb + gb;
            *b -= cfg.learning_rate * *vb;
        }
    }
}

/// Class probabilities for every row of `ds`.
pub fn predict_proba_rows(m: &NetworkModel, ds: &Dataset) -> Vec<Vec<f64>> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    let c = m.class_count();
    let mut ws = Workspace::new(m.layer_count());
    let mut out = Vec::with_capacity(ds.len());
    for chunk in idx.chunks(256) {
        batch_forward(m, ds, chunk, &mut ws);
        out.extend(ws.acts[m.layer_count()].chunks_exact(c).map(<[f64]>::to_vec));
    }
    out
}

// ---------------------------------------------------------------------------
// Hyperparameter search

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub width_min: usize,
    pub width_max: usize,
    pub depth_min: usize,
    pub depth_max: usize,
    pub l2_min: f64,
    pub l2_max: f64,
    pub draws: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            width_min: 20,
            width_max: 400,
            depth_min: 1,
            depth_max: 3,
            l2_min: 1e-5,
            l2_max: 1e-2,
            draws: 20,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let ok = self.width_min >= 1
            && self.width_min <= self.width_max
            && self.depth_min >= 1
            && self.depth_min <= self.depth_max
            && self.l2_min > 0.0
            && self.l2_min <= self.l2_max
            && self.draws >= 1;
        if ok {
            Ok(())
        } else {
            Err(NetworkError::InvalidArgument(format!("empty search space: {self:?}")))
        }
    }

    /// One configuration: uniform depth, uniform widths per layer and
    /// log-uniform l2.
    pub fn sample(&self, rng: &mut seed::Rng) -> (Vec<usize>, f64) {
        let depth = rng.gen_range(self.depth_min..=self.depth_max);
        let arch = (0..depth)
            .map(|_| rng.gen_range(self.width_min..=self.width_max))
            .collect();
        let (lo, hi) = (self.l2_min.log10(), self.l2_max.log10());
        let l2 = if hi > lo {
            10f64.powf(rng.gen_range(lo..hi))
        } else {
            self.l2_min
        };
        (arch, l2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchEntry {
    pub draw: usize,
    pub arch: Vec<usize>,
    pub l2: f64,
    pub fold_kappas: Vec<f64>,
    /// `None` when a fold diverged; such draws rank below everything.
    pub mean_kappa: Option<f64>,
    pub error: Option<String>,
}

impl SearchEntry {
    pub fn score(&self) -> f64 {
        self.mean_kappa.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub arch: Vec<usize>,
    pub l2: f64,
    pub log: Vec<SearchEntry>,
}

/// Index of the highest-scoring entry; the earliest draw wins ties.
pub fn select_best(entries: &[SearchEntry]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in entries.iter().enumerate() {
        if best.map_or(true, |b| e.score() > entries[b].score()) {
            best = Some(i);
        }
    }
    best
}

/// Random search over architecture and l2, scoring each draw by mean Cohen's
/// kappa over stratified folds of `ds`.
pub fn random_search(
    ds: &Dataset,
    space: &SearchSpace,
    folds: usize,
    base: &TrainConfig,
    seed: u64,
) -> Result<SearchResult> {
    space.validate()?;
    base.validate()?;
    let plan = data::stratified_folds(ds, folds, seed::substream(seed, "search-folds", 0))?;
    let splits: Vec<(Dataset, Dataset)> = (0..folds)
        .map(|f| (ds.subset(&plan.train_indices(f)), ds.subset(&plan.test_indices(f))))
        .collect();
    let mut sampler = seed::rng(seed::substream(seed, "search-draws", 0));
    let mut log = Vec::with_capacity(space.draws);
    for draw in 0..space.draws {
        let (arch, l2) = space.sample(&mut sampler);
        let cfg = TrainConfig {
            l2,
            seed: seed::substream(seed, "search-train", draw as u64),
            ..base.clone()
        };
        let mut fold_kappas = Vec::with_capacity(folds);
        let mut error = None;
        for (train_ds, test_ds) in &splits {
            match train(train_ds, &arch, &cfg) {
                Ok(model) => {
                    let preds: Vec<usize> = predict_proba_rows(&model, test_ds)
                        .iter()
                        .map(|p| argmax(p))
                        .collect();
                    let k = metrics::kappa_from_labels(test_ds.labels(), &preds, ds.class_count())
                        .map_err(|e| NetworkError::Data(e.to_string()))?;
                    fold_kappas.push(k);
                }
                Err(e @ NetworkError::TrainingDiverged { .. }) => {
                    error = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let mean_kappa = error
            .is_none()
            .then(|| fold_kappas.iter().sum::<f64>() / fold_kappas.len() as f64);
        log.push(SearchEntry {
            draw,
            arch,
            l2,
            fold_kappas,
            mean_kappa,
            error,
        });
    }
    let best = select_best(&log).expect("draws >= 1");
    Ok(SearchResult {
        arch: log[best].arch.clone(),
        l2: log[best].l2,
        log,
    })
}
