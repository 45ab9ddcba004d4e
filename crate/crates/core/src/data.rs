//! Datasets, the Gaussian XOR generator, CSV ingestion, stratified folds and
//! the logarithmic sample-size schedule.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric feature at row {row}, column `{column}`: {value:?}")]
    NonNumeric {
        row: u64,
        column: String,
        value: String,
    },
    #[error("non-finite feature at row {row}, column `{column}`")]
    NonFinite { row: u64, column: String },
    #[error("dataset has a single class; at least two are required")]
    SingleClass,
    #[error("dataset is empty")]
    Empty,
    #[error("class {class} has {count} members, fewer than the {folds} folds requested")]
    StratificationInfeasible {
        class: usize,
        count: usize,
        folds: usize,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// A labelled feature matrix. Features are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    features: Vec<f64>,
    labels: Vec<usize>,
    n: usize,
    d: usize,
    class_count: usize,
    pub feature_names: Option<Vec<String>>,
    pub class_names: Option<Vec<String>>,
}

impl Dataset {
    /// Build a dataset from row-major features. `class_count` must exceed
    /// every label.
    pub fn new(
        name: impl Into<String>,
        features: Vec<f64>,
        d: usize,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if d == 0 {
            return Err(DataError::InvalidArgument("dimension must be >= 1".into()));
        }
        if labels.is_empty() {
            return Err(DataError::Empty);
        }
        if features.len() != labels.len() * d {
            return Err(DataError::InvalidArgument(format!(
                "feature buffer has {} values, expected {} x {}",
                features.len(),
                labels.len(),
                d
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(DataError::InvalidArgument(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                row: (pos / d + 1) as u64,
                column: format!("x{}", pos % d),
            });
        }
        Ok(Self {
            name: name.into(),
            n: labels.len(),
            features,
            labels,
            d,
            class_count,
            feature_names: None,
            class_names: None,
        })
    }

    pub fn from_rows(
        name: impl Into<String>,
        rows: &[Vec<f64>],
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(DataError::InvalidArgument("ragged rows".into()));
        }
        let features = rows.iter().flatten().copied().collect();
        Self::new(name, features, d, labels, class_count)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.d)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.class_count];
        for &y in &self.labels {
            hist[y] += 1;
        }
        hist
    }

    /// Indices of the members of each class, in dataset order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.class_count];
        for (i, &y) in self.labels.iter().enumerate() {
            members[y].push(i);
        }
        members
    }

    /// The rows at `indices`, in that order. Class count and names are kept.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            name: self.name.clone(),
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n: indices.len(),
            d: self.d,
            class_count: self.class_count,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// The same rows with every feature passed through `f(column, value)`.
    pub fn map_features(&self, f: impl Fn(usize, f64) -> f64) -> Dataset {
        let mut out = self.clone();
        for (k, v) in out.features.iter_mut().enumerate() {
            *v = f(k % self.d, *v);
        }
        out
    }

    /// Per-axis (min, max) over all rows.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); self.d];
        for row in self.rows() {
            for (b, &v) in bounds.iter_mut().zip(row) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        bounds
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            name: self.name.clone(),
            n: self.n,
            d: self.d,
            class_count: self.class_count,
            class_histogram: self.class_histogram(),
        }
    }
}

/// JSON-facing description of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub class_count: usize,
    pub class_histogram: Vec<usize>,
}

// ---------------------------------------------------------------------------
// Gaussian XOR

/// Cluster centres of class 0 and class 1.
pub const XOR_CENTERS: [[[f64; 2]; 2]; 2] = [
    [[-1.0, -1.0], [1.0, 1.0]],
    [[1.0, -1.0], [-1.0, 1.0]],
];

pub const DEFAULT_XOR_SIGMA: f64 = 0.5;

/// Draw independent train and test sets from the Gaussian XOR mixture.
pub fn gen_gaussian_xor(
    n_train: usize,
    n_test: usize,
    sigma: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || n_test == 0 {
        return Err(DataError::InvalidArgument(
            "sample sizes must be positive".into(),
        ));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(DataError::InvalidArgument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut draw = |n: usize, name: &str| {
        let mut features = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let class = usize::from(rng.gen_bool(0.5));
            let center = XOR_CENTERS[class][usize::from(rng.gen_bool(0.5))];
            for c in center {
                let z: f64 = rng.sample(StandardNormal);
                features.push(c + sigma * z);
            }
            labels.push(class);
        }
        let mut ds = Dataset::new(name, features, 2, labels, 2)?;
        ds.feature_names = Some(vec!["x0".into(), "x1".into()]);
        Ok::<_, DataError>(ds)
    };
    let train = draw(n_train, "xor-train")?;
    let test = draw(n_test, "xor-test")?;
    Ok((train, test))
}

/// True class posterior `[P(y=0|x), P(y=1|x)]` of the XOR mixture.
pub fn xor_posterior(x: [f64; 2], sigma: f64) -> [f64; 2] {
    let g = |t: f64| (-(t * t) / (2.0 * sigma * sigma)).exp();
    let (ap, am) = (g(x[0] + 1.0), g(x[0] - 1.0));
    let (bp, bm) = (g(x[1] + 1.0), g(x[1] - 1.0));
    let f0 = ap * bp + am * bm;
    let f1 = am * bp + ap * bm;
    let total = f0 + f1;
    if total == 0.0 {
        // far from every centre both densities underflow; fall back to the
        // sign rule, which is the limit of the ratio
        return if x[0] * x[1] > 0.0 { [1.0, 0.0] } else { [0.0, 1.0] };
    }
    [f0 / total, f1 / total]
}

/// Bayes accuracy of the XOR mixture by midpoint quadrature of
/// `max(p0 f0, p1 f1)` over `[-half_width, half_width]^2`.
pub fn xor_bayes_accuracy(sigma: f64, half_width: f64, step: f64) -> f64 {
    let cells = (2.0 * half_width / step).round() as usize;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    let g = |t: f64| (-(t * t) / (2.0 * sigma * sigma)).exp();
    let mids: Vec<f64> = (0..cells)
        .map(|i| -half_width + (i as f64 + 0.5) * step)
        .collect();
    let plus: Vec<f64> = mids.iter().map(|&t| g(t + 1.0)).collect();
    let minus: Vec<f64> = mids.iter().map(|&t| g(t - 1.0)).collect();
    let mut total = 0.0;
    for i in 0..cells {
        let mut row = 0.0;
        for j in 0..cells {
            let f0 = plus[i] * plus[j] + minus[i] * minus[j];
            let f1 = minus[i] * plus[j] + plus[i] * minus[j];
            row += f0.max(f1);
        }
        total += row;
    }
    // each class is a two-component mixture with weight 1/4 per component
    0.25 * norm * total * step * step
}

/// Per-feature z-scoring. Constant features keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Self {
        let n = ds.len() as f64;
        let mut mean = vec![0.0; ds.dim()];
        for row in ds.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; ds.dim()];
        for row in ds.rows() {
            for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v: f64| if v > 1e-24 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, ds: &Dataset) -> Dataset {
        ds.map_features(|j, v| (v - self.mean[j]) / self.scale[j])
    }
}

// ---------------------------------------------------------------------------
// CSV

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("class".into())
    }
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(s) => f.write_str(s),
        }
    }
}

/// Load a headed CSV. Labels are re-indexed densely in order of first
/// appearance; every other column must parse as a finite real.
pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_idx = match label_column {
        LabelColumn::Index(i) if *i < headers.len() => *i,
        LabelColumn::Index(i) => return Err(DataError::MissingColumn(i.to_string())),
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.clone()))?,
    };
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(DataError::InvalidArgument("no feature columns".into()));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(DataError::InvalidArgument(format!(
                "row {line} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            let value: f64 = cell.trim().parse().map_err(|_| DataError::NonNumeric {
                row: line,
                column: headers[i].clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    row: line,
                    column: headers[i].clone(),
                });
            }
            features.push(value);
        }
        let raw = record[label_idx].trim().to_string();
        let next = class_index.len();
        let y = *class_index.entry(raw.clone()).or_insert_with(|| {
            class_names.push(raw);
            next
        });
        labels.push(y);
    }
    if labels.is_empty() {
        return Err(DataError::Empty);
    }
    if class_names.len() < 2 {
        return Err(DataError::SingleClass);
    }
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    let mut ds = Dataset::new(name, features, feature_names.len(), labels, class_names.len())?;
    ds.feature_names = Some(feature_names);
    ds.class_names = Some(class_names);
    Ok(ds)
}

/// Write a dataset as CSV with the label in a trailing `class` column.
/// Floats are written in shortest round-trip form.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = match &ds.feature_names {
        Some(names) => names.clone(),
        None => (0..ds.d).map(|j| format!("x{j}")).collect(),
    };
    header.push("class".into());
    writer.write_record(&header)?;
    for (row, &y) in ds.rows().zip(&ds.labels) {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        fields.push(match &ds.class_names {
            Some(names) => names[y].clone(),
            None => y.to_string(),
        });
        writer.write_record(&fields)?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Sampling

/// Split `total` across groups proportionally to `weights` by largest
/// remainder; ties go to the lower group index.
pub(crate) fn apportion(weights: &[usize], total: usize) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut out: Vec<usize> = weights.iter().map(|&w| w * total / sum).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // remainder of w*total/sum, compared exactly in integers
    order.sort_by_key(|&i| std::cmp::Reverse((weights[i] * total) % sum));
    for &i in order.iter().take(total - assigned) {
        out[i] += 1;
    }
    out
}

/// Stratified subsample of at most `cap` rows. Identity when `n <= cap`.
/// Selected rows keep their original relative order.
pub fn downsample(ds: &Dataset, cap: usize, seed: u64) -> Result<Dataset> {
    if cap < ds.class_count {
        return Err(DataError::InvalidArgument(format!(
            "cap {cap} is below the class count {}",
            ds.class_count
        )));
    }
    if ds.n <= cap {
        return Ok(ds.clone());
    }
    let members = ds.class_members();
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let quota = apportion(&sizes, cap);
    let mut rng = seed::rng(seed);
    let mut keep = Vec::with_capacity(cap);
    for (mut idx, q) in members.into_iter().zip(quota) {
        idx.shuffle(&mut rng);
        keep.extend_from_slice(&idx[..q]);
    }
    keep.sort_unstable();
    Ok(ds.subset(&keep))
}

/// Round half up, floored at 1.
pub fn round_half_up(v: f64) -> usize {
    ((v + 0.5).floor() as usize).max(1)
}

/// Training-set sizes evenly spaced on a log scale from `5 * C` to the fold size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSchedule {
    pub sizes: Vec<usize>,
    pub class_count: usize,
    pub fold_size: usize,
    /// Set when the fold is too small for a proper schedule and a single
    /// size was returned.
    pub degenerate: bool,
}

pub const SCHEDULE_LEN: usize = 8;

pub fn make_schedule(class_count: usize, fold_size: usize) -> SampleSchedule {
    make_schedule_with_len(class_count, fold_size, SCHEDULE_LEN)
}

pub fn make_schedule_with_len(class_count: usize, fold_size: usize, len: usize) -> SampleSchedule {
    let smallest = 5 * class_count;
    if fold_size <= smallest || len < 2 {
        return SampleSchedule {
            sizes: vec![fold_size],
            class_count,
            fold_size,
            degenerate: true,
        };
    }
    let lo = (smallest as f64).ln();
    let step = ((fold_size as f64).ln() - lo) / (len - 1) as f64;
    let mut sizes: Vec<usize> = (0..len)
        .map(|i| round_half_up((lo + i as f64 * step).exp()))
        .collect();
    sizes[0] = smallest;
    sizes[len - 1] = fold_size;
    sizes.dedup();
    SampleSchedule {
        sizes,
        class_count,
        fold_size,
        degenerate: false,
    }
}

/// Stratified k-fold assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub fold_count: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

pub const DEFAULT_FOLDS: usize = 5;

/// Each class is shuffled and dealt round-robin over the folds, continuing
/// the deal where the previous class stopped so fold sizes stay balanced.
pub fn stratified_folds(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(DataError::InvalidArgument(format!(
            "fold count must be >= 2, got {k}"
        )));
    }
    let members = ds.class_members();
    for (class, m) in members.iter().enumerate() {
        if !m.is_empty() && m.len() < k {
            return Err(DataError::StratificationInfeasible {
                class,
                count: m.len(),
                folds: k,
            });
        }
    }
    let mut rng = seed::rng(seed);
    let mut assignments = vec![0; ds.n];
    let mut position = 0;
    for mut idx in members {
        idx.shuffle(&mut rng);
        for i in idx {
            assignments[i] = position % k;
            position += 1;
        }
    }
    Ok(FoldPlan {
        fold_count: k,
        assignments,
        seed,
    })
}

/// Order `indices` so that every prefix is close to class-proportional:
/// each class is shuffled, then its j-th member is placed at relative
/// position `(j + 1/2) / n_class`.
pub fn stratified_order(ds: &Dataset, indices: &[usize], seed: u64) -> Vec<usize> {
    let mut by_class = vec![Vec::new(); ds.class_count];
    for &i in indices {
        by_class[ds.labels[i]].push(i);
    }
    let mut rng = seed::rng(seed);
    let mut keyed = Vec::with_capacity(indices.len());
    for (class, mut idx) in by_class.into_iter().enumerate() {
        idx.shuffle(&mut rng);
        let m = idx.len();
        for (j, i) in idx.into_iter().enumerate() {
            // (2j+1)/(2m) compared as a fraction avoids float ties
            keyed.push(((2 * j + 1) as u128, (2 * m) as u128, class, i));
        }
    }
    keyed.sort_by(|a, b| {
        (a.0 * b.1)
            .cmp(&(b.0 * a.1))
            .then(a.2.cmp(&b.2))
    });
    keyed.into_iter().map(|k| k.3).collect()
}
