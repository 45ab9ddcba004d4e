//! The learning-curve benchmark.
//!
//! For every dataset: downsample to the cap, build stratified folds, tune
//! both families once on the full data, then for every fold and every size
//! of the logarithmic schedule fit on a prefix of a fixed stratified order
//! of the training fold and score on the held-out fold. Records are
//! appended to a JSON-lines log as they finish, and a rerun over the same
//! output directory skips everything already recorded.

mod aggregate;

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{
    aggregate, cross_dataset_band, dataset_curves, dedup_records, percentile, report_markdown, BandPoint,
    GroupSummary, Metric,
};

use crate::data::{self, Dataset, LabelColumn, SampleSchedule};
use crate::forest::{self, ForestParams, MaxFeatures};
use crate::metrics::{self, argmax};
use crate::network::{self, SearchSpace, TrainConfig};
use crate::seed;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("dataset `{name}`: {source}")]
    Data {
        name: String,
        source: data::DataError,
    },
    #[error("tuning `{name}`: {message}")]
    Tuning { name: String, message: String },
    #[error("no records")]
    Empty,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Forest,
    Network,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Forest => "forest",
            Family::Network => "network",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "forest" => Ok(Family::Forest),
            "network" => Ok(Family::Network),
            other => Err(format!("unknown family `{other}`")),
        }
    }
}

/// Where a benchmark dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Csv {
        name: String,
        path: PathBuf,
        #[serde(default)]
        label_column: LabelColumn,
    },
    Xor {
        name: String,
        n: usize,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
}

fn default_sigma() -> f64 {
    data::DEFAULT_XOR_SIGMA
}

impl DatasetSource {
    pub fn name(&self) -> &str {
        match self {
            DatasetSource::Csv { name, .. } | DatasetSource::Xor { name, .. } => name,
        }
    }

    pub fn load(&self, master_seed: u64) -> data::Result<Dataset> {
        let mut ds = match self {
            DatasetSource::Csv {
                path, label_column, ..
            } => data::load_csv(path, label_column)?,
            DatasetSource::Xor { n, sigma, name } => {
                let s = seed::substream(master_seed, &format!("xor/{name}"), 0);
                data::gen_gaussian_xor(*n, 1, *sigma, s)?.0
            }
        };
        ds.name = self.name().to_string();
        Ok(ds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSettings {
    pub tree_count: usize,
    /// Candidate per-split feature budgets tried during tuning.
    pub max_features: Vec<MaxFeatures>,
}

impl Default for ForestSettings {
    fn default() -> Self {
        Self {
            tree_count: forest::DEFAULT_TREE_COUNT,
            max_features: MaxFeatures::GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSettings {
    pub search: SearchSpace,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetSource>,
    pub families: Vec<Family>,
    pub sample_cap: usize,
    pub folds: usize,
    pub schedule_len: usize,
    pub forest: ForestSettings,
    pub network: NetworkSettings,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads for benchmark cells.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            families: vec![Family::Forest, Family::Network],
            sample_cap: 10_000,
            folds: data::DEFAULT_FOLDS,
            schedule_len: data::SCHEDULE_LEN,
            forest: ForestSettings::default(),
            network: NetworkSettings::default(),
            seed: 0,
            output_dir: PathBuf::from("bench-out"),
            jobs: 1,
        }
    }
}

impl BenchConfig {
    /// Parse a TOML config; relative dataset paths resolve against `base`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: BenchConfig = toml::from_str(text)?;
        if let Some(base) = base {
            for ds in &mut cfg.datasets {
                if let DatasetSource::Csv { path, .. } = ds {
                    if path.is_relative() {
                        *path = base.join(&*path);
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BenchError::Config(m));
        if self.datasets.is_empty() {
            return fail("at least one dataset is required".into());
        }
        let mut names = HashSet::new();
        for ds in &self.datasets {
            if !names.insert(ds.name()) {
                return fail(format!("duplicate dataset name `{}`", ds.name()));
            }
            if let DatasetSource::Xor { n, sigma, .. } = ds {
                if *n == 0 || !(*sigma > 0.0) {
                    return fail(format!("xor dataset `{}` needs n >= 1 and sigma > 0", ds.name()));
                }
            }
        }
        if self.families.is_empty() {
            return fail("at least one model family is required".into());
        }
        if self.folds < 2 {
            return fail(format!("folds must be >= 2, got {}", self.folds));
        }
        if self.sample_cap == 0 || self.schedule_len == 0 || self.jobs == 0 {
            return fail("sample_cap, schedule_len and jobs must be positive".into());
        }
        if self.forest.tree_count == 0 || self.forest.max_features.is_empty() {
            return fail("forest needs tree_count >= 1 and a max_features grid".into());
        }
        self.network
            .search
            .validate()
            .and_then(|_| self.network.train.validate())
            .map_err(|e| BenchError::Config(e.to_string()))
    }
}

/// One (dataset, family, fold, size) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub family: Family,
    pub params: String,
    pub fold: usize,
    pub size: usize,
    pub size_index: usize,
    pub kappa: Option<f64>,
    pub ece: Option<f64>,
    pub accuracy: Option<f64>,
    pub seconds: Option<f64>,
    pub seed: u64,
    pub timestamp: u64,
    pub error: Option<String>,
}

pub type RecordKey = (String, Family, usize, usize);

impl RunRecord {
    pub fn key(&self) -> RecordKey {
        (self.dataset.clone(), self.family, self.fold, self.size)
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Tuned hyperparameters of one dataset, reused at every schedule size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub dataset: String,
    pub forest_max_features: usize,
    /// `(max_features, mean fold kappa)` per grid value.
    pub forest_scores: Vec<(usize, f64)>,
    pub network_arch: Vec<usize>,
    pub network_l2: f64,
    pub search_log: Vec<network::SearchEntry>,
    pub criterion: String,
    pub optimizer: String,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    /// Every record in the log after the run, sorted by key.
    pub records: Vec<RunRecord>,
    /// Model fits performed by this invocation, tuning included.
    pub new_runs: usize,
    pub tunings: Vec<Tuning>,
    pub schedules: Vec<(String, SampleSchedule)>,
    pub files: Vec<PathBuf>,
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const CSV_FILE: &str = "records.csv";
pub const TUNING_DIR: &str = "tuning";

/// Read every parseable line of a records log. A torn final line from an
/// interrupted run is skipped.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(r) = serde_json::from_str::<RunRecord>(&line) {
            out.push(r);
        }
    }
    Ok(out)
}

fn log_ends_cleanly(path: &Path) -> Result<bool> {
    let bytes = fs::read(path)?;
    Ok(bytes.last().map_or(true, |&b| b == b'\n'))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV export with the fixed column order
/// `dataset, family, fold, size, kappa, ece, accuracy, seconds, seed`.
pub fn write_records_csv(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "dataset", "family", "fold", "size", "kappa", "ece", "accuracy", "seconds", "seed",
    ])?;
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.key());
    for r in sorted {
        w.write_record([
            r.dataset.clone(),
            r.family.to_string(),
            r.fold.to_string(),
            r.size.to_string(),
            opt(r.kappa),
            opt(r.ece),
            opt(r.accuracy),
            opt(r.seconds),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

struct Prepared {
    ds: Dataset,
    plan: data::FoldPlan,
    schedule: SampleSchedule,
}

fn prepare(cfg: &BenchConfig, source: &DatasetSource) -> Result<Prepared> {
    let name = source.name().to_string();
    let wrap = |source| BenchError::Data {
        name: name.clone(),
        source,
    };
    let raw = source.load(cfg.seed).map_err(wrap)?;
    let ds = data::downsample(
        &raw,
        cfg.sample_cap,
        seed::substream(cfg.seed, &format!("downsample/{name}"), 0),
    )
    .map_err(wrap)?;
    let plan = data::stratified_folds(
        &ds,
        cfg.folds,
        seed::substream(cfg.seed, &format!("folds/{name}"), 0),
    )
    .map_err(wrap)?;
    // one schedule per dataset so sizes line up across folds
    let fold_size = (0..cfg.folds)
        .map(|f| plan.train_indices(f).len())
        .min()
        .unwrap_or(0);
    let schedule = data::make_schedule_with_len(ds.class_count(), fold_size, cfg.schedule_len);
    Ok(Prepared { ds, plan, schedule })
}

fn fold_kappa_forest(
    ds: &Dataset,
    plan: &data::FoldPlan,
    params: &ForestParams,
    seed: u64,
) -> std::result::Result<f64, String> {
    let mut total = 0.0;
    for f in 0..plan.fold_count {
        let train = ds.subset(&plan.train_indices(f));
        let test = ds.subset(&plan.test_indices(f));
        let model = forest::train_forest(&train, params, seed::substream(seed, "fold", f as u64))
            .map_err(|e| e.to_string())?;
        let preds: Vec<usize> = test
            .rows()
            .map(|x| model.predict(x).map_err(|e| e.to_string()))
            .collect::<std::result::Result<_, _>>()?;
        total += metrics::kappa_from_labels(test.labels(), &preds, ds.class_count())
            .map_err(|e| e.to_string())?;
    }
    Ok(total / plan.fold_count as f64)
}

fn tune(cfg: &BenchConfig, prep: &Prepared, runs: &mut usize) -> Result<Tuning> {
    let ds = &prep.ds;
    let name = ds.name.clone();
    let tuning_err = |message: String| BenchError::Tuning {
        name: name.clone(),
        message,
    };

    let mut grid: Vec<usize> = cfg
        .forest
        .max_features
        .iter()
        .map(|m| m.resolve(ds.dim()))
        .collect();
    grid.sort_unstable();
    grid.dedup();
    let mut forest_scores = Vec::with_capacity(grid.len());
    let mut best = (grid[0], f64::NEG_INFINITY);
    if cfg.families.contains(&Family::Forest) {
        for &mf in &grid {
            let params = ForestParams::new(cfg.forest.tree_count, mf);
            let s = seed::substream(cfg.seed, &format!("forest-tune/{name}"), mf as u64);
            let k = fold_kappa_forest(ds, &prep.plan, &params, s).map_err(&tuning_err)?;
            *runs += prep.plan.fold_count;
            forest_scores.push((mf, k));
            if k > best.1 {
                best = (mf, k);
            }
        }
    }

    let (network_arch, network_l2, search_log) = if cfg.families.contains(&Family::Network) {
        let result = network::random_search(
            ds,
            &cfg.network.search,
            cfg.folds,
            &cfg.network.train,
            seed::substream(cfg.seed, &format!("search/{name}"), 0),
        )
        .map_err(|e| tuning_err(e.to_string()))?;
        *runs += cfg.network.search.draws * cfg.folds;
        (result.arch, result.l2, result.log)
    } else {
        (Vec::new(), cfg.network.train.l2, Vec::new())
    };

    Ok(Tuning {
        dataset: name,
        forest_max_features: best.0,
        forest_scores,
        network_arch,
        network_l2,
        search_log,
        criterion: "gini".into(),
        optimizer: format!(
            "sgd(lr={}, momentum={}, batch={}, standardize={})",
            cfg.network.train.learning_rate,
            cfg.network.train.momentum,
            cfg.network.train.batch_size,
            cfg.network.train.standardize
        ),
    })
}

struct Cell<'a> {
    prep: &'a Prepared,
    tuning: &'a Tuning,
    family: Family,
    fold: usize,
    size_index: usize,
    size: usize,
    order: &'a [usize],
}

fn run_cell(cfg: &BenchConfig, cell: &Cell<'_>) -> RunRecord {
    let ds = &cell.prep.ds;
    let name = &ds.name;
    let fit_seed = seed::substream(
        cfg.seed,
        &format!("fit/{name}/{}", cell.family),
        cell.fold as u64,
    );
    let train = ds.subset(&cell.order[..cell.size.min(cell.order.len())]);
    let test = ds.subset(&cell.prep.plan.test_indices(cell.fold));

    let (params, fitted) = match cell.family {
        Family::Forest => {
            let params = ForestParams::new(cfg.forest.tree_count, cell.tuning.forest_max_features);
            let desc = format!("trees={};max_features={}", params.tree_count, params.max_features);
            let (model, secs) = metrics::timed(|| forest::train_forest(&train, &params, fit_seed));
            let probs = model.map_err(|e| e.to_string()).and_then(|m| {
                test.rows()
                    .map(|x| m.posterior(x).map_err(|e| e.to_string()))
                    .collect::<std::result::Result<Vec<_>, _>>()
            });
            (desc, probs.map(|p| (p, secs)))
        }
        Family::Network => {
            let train_cfg = TrainConfig {
                l2: cell.tuning.network_l2,
                seed: fit_seed,
                ..cfg.network.train.clone()
            };
            let arch = &cell.tuning.network_arch;
            let desc = format!(
                "arch={};l2={}",
                arch.iter().map(usize::to_string).collect::<Vec<_>>().join("-"),
                train_cfg.l2
            );
            let (model, secs) = metrics::timed(|| network::train(&train, arch, &train_cfg));
            let probs = model
                .map_err(|e| e.to_string())
                .map(|m| network::predict_proba_rows(&m, &test));
            (desc, probs.map(|p| (p, secs)))
        }
    };

    let mut record = RunRecord {
        dataset: name.clone(),
        family: cell.family,
        params,
        fold: cell.fold,
        size: cell.size,
        size_index: cell.size_index,
        kappa: None,
        ece: None,
        accuracy: None,
        seconds: None,
        seed: fit_seed,
        timestamp: now(),
        error: None,
    };
    let scored = fitted.and_then(|(probs, secs)| {
        let preds: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
        let err = |e: metrics::MetricError| e.to_string();
        let cm = metrics::ConfusionMatrix::from_labels(test.labels(), &preds, ds.class_count())
            .map_err(err)?;
        let kappa = metrics::cohen_kappa(&cm).map_err(err)?.value;
        let ece = metrics::ece(&probs, test.labels(), metrics::DEFAULT_ECE_BINS).map_err(err)?;
        let acc = metrics::accuracy(&preds, test.labels()).map_err(err)?;
        Ok((kappa, ece, acc, secs))
    });
    match scored {
        Ok((kappa, ece, acc, secs)) => {
            record.kappa = Some(kappa);
            record.ece = Some(ece);
            record.accuracy = Some(acc);
            record.seconds = Some(secs);
        }
        Err(e) => record.error = Some(e),
    }
    record
}

fn tuning_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(TUNING_DIR).join(format!("{name}.json"))
}

/// Run (or resume) the benchmark described by `cfg`.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out.join(TUNING_DIR))?;
    let log_path = out.join(RECORDS_FILE);
    let existing = read_records(&log_path)?;
    let done: HashSet<RecordKey> = existing.iter().map(RunRecord::key).collect();

    let mut runs = 0;
    let mut prepared = Vec::with_capacity(cfg.datasets.len());
    let mut tunings = Vec::with_capacity(cfg.datasets.len());
    let mut files = vec![log_path.clone()];
    for source in &cfg.datasets {
        let prep = prepare(cfg, source)?;
        let path = tuning_path(out, source.name());
        let tuning = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)?,
            Err(_) => {
                let t = tune(cfg, &prep, &mut runs)?;
                fs::write(&path, serde_json::to_string_pretty(&t)?)?;
                t
            }
        };
        files.push(path);
        prepared.push(prep);
        tunings.push(tuning);
    }

    // fixed stratified order of every training fold; sizes are prefixes
    let orders: Vec<Vec<Vec<usize>>> = prepared
        .iter()
        .map(|p| {
            (0..cfg.folds)
                .map(|f| {
                    let s = seed::substream(cfg.seed, &format!("order/{}", p.ds.name), f as u64);
                    data::stratified_order(&p.ds, &p.plan.train_indices(f), s)
                })
                .collect()
        })
        .collect();

    let mut cells = Vec::new();
    for (d, prep) in prepared.iter().enumerate() {
        for fold in 0..cfg.folds {
            for (size_index, &size) in prep.schedule.sizes.iter().enumerate() {
                for &family in &cfg.families {
                    let key = (prep.ds.name.clone(), family, fold, size);
                    if done.contains(&key) {
                        continue;
                    }
                    cells.push(Cell {
                        prep,
                        tuning: &tunings[d],
                        family,
                        fold,
                        size_index,
                        size,
                        order: &orders[d][fold],
                    });
                }
            }
        }
    }
    runs += cells.len();

    let mut log = OpenOptions::new().create(true).append(true).open(&log_path)?;
    if !log_ends_cleanly(&log_path)? {
        // terminate a torn line so the next record starts on its own
        writeln!(log)?;
    }
    let writer = Mutex::new(log);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let fresh: Vec<RunRecord> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let record = run_cell(cfg, cell);
                let line = serde_json::to_string(&record)?;
                let mut file = writer.lock().expect("writer poisoned");
                writeln!(file, "{line}")?;
                file.flush()?;
                Ok(record)
            })
            .collect::<Result<_>>()
    })?;

    let mut records = existing;
    records.extend(fresh);
    let mut records = dedup_records(&records);
    records.sort_by_key(RunRecord::key);
    let csv_path = out.join(CSV_FILE);
    write_records_csv(&records, &csv_path)?;
    files.push(csv_path);

    Ok(BenchOutcome {
        records,
        new_runs: runs,
        tunings,
        schedules: prepared
            .iter()
            .map(|p| (p.ds.name.clone(), p.schedule.clone()))
            .collect(),
        files,
    })
}
