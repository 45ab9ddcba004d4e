//! Cohen's kappa, expected calibration error, accuracy and wall-clock timing.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no samples")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("probability row {row} sums to {sum}, not 1")]
    NotNormalized { row: usize, sum: f64 },
    #[error("bin count must be positive")]
    NoBins,
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// Rows are the truth, columns the prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_labels(truth: &[usize], preds: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != preds.len() {
            return Err(MetricError::LengthMismatch(truth.len(), preds.len()));
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(preds) {
            for label in [t, p] {
                if label >= classes {
                    return Err(MetricError::LabelOutOfRange { label, classes });
                }
            }
            cm.counts[t * classes + p] += 1;
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts
            .chunks_exact(self.classes.max(1))
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.classes)
            .map(|j| (0..self.classes).map(|i| self.get(i, j)).sum())
            .collect()
    }
}

/// Kappa together with a flag for the degenerate `p_c = 1` case, where the
/// value is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub value: f64,
    pub degenerate: bool,
}

pub fn cohen_kappa(cm: &ConfusionMatrix) -> Result<Kappa> {
    let n = cm.total();
    if n == 0 {
        return Err(MetricError::Empty);
    }
    let n = n as f64;
    let observed = cm.trace() as f64 / n;
    let chance: f64 = cm
        .row_sums()
        .iter()
        .zip(cm.col_sums())
        .map(|(&r, c)| (r as f64 / n) * (c as f64 / n))
        .sum();
    if chance >= 1.0 {
        return Ok(Kappa {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Kappa {
        value: (observed - chance) / (1.0 - chance),
        degenerate: false,
    })
}

pub fn kappa_from_labels(truth: &[usize], preds: &[usize], classes: usize) -> Result<f64> {
    cohen_kappa(&ConfusionMatrix::from_labels(truth, preds, classes)?).map(|k| k.value)
}

pub const DEFAULT_ECE_BINS: usize = 40;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub count: usize,
    /// Fraction of correct predictions in the bin; 0 when empty.
    pub accuracy: f64,
    pub mean_confidence: f64,
}

/// Equal-width confidence bins over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBins {
    pub bins: Vec<CalibrationBin>,
    pub total: usize,
}

impl CalibrationBins {
    pub fn ece(&self) -> f64 {
        let n = self.total as f64;
        self.bins
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| (b.count as f64 / n) * (b.accuracy - b.mean_confidence).abs())
            .sum()
    }
}

/// Bin of a confidence value. Interior edges belong to the upper bin and
/// 1.0 to the last one.
pub fn bin_index(confidence: f64, bins: usize) -> usize {
    ((confidence * bins as f64).floor() as usize).min(bins - 1)
}

/// Index of the largest entry; ties go to the smaller index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub const NORMALIZATION_TOL: f64 = 1e-9;

pub fn calibration_bins<R: AsRef<[f64]>>(
    probs: &[R],
    truth: &[usize],
    bins: usize,
) -> Result<CalibrationBins> {
    if bins == 0 {
        return Err(MetricError::NoBins);
    }
    if probs.len() != truth.len() {
        return Err(MetricError::LengthMismatch(probs.len(), truth.len()));
    }
    if probs.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut correct = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (row, (p, &y)) in probs.iter().zip(truth).enumerate() {
        let p = p.as_ref();
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(MetricError::NotNormalized { row, sum });
        }
        let pred = argmax(p);
        let confidence = p[pred];
        let b = bin_index(confidence, bins);
        counts[b] += 1;
        conf_sum[b] += confidence;
        if pred == y {
            correct[b] += 1;
        }
    }
    let bins = (0..bins)
        .map(|b| match counts[b] {
            0 => CalibrationBin::default(),
            c => CalibrationBin {
                count: c,
                accuracy: correct[b] as f64 / c as f64,
                mean_confidence: conf_sum[b] / c as f64,
            },
        })
        .collect();
    Ok(CalibrationBins {
        bins,
        total: truth.len(),
    })
}

pub fn ece<R: AsRef<[f64]>>(probs: &[R], truth: &[usize], bins: usize) -> Result<f64> {
    calibration_bins(probs, truth, bins).map(|b| b.ece())
}

pub fn accuracy(preds: &[usize], truth: &[usize]) -> Result<f64> {
    if preds.len() != truth.len() {
        return Err(MetricError::LengthMismatch(preds.len(), truth.len()));
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    let hits = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Run `f` and return its result with elapsed wall seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}
