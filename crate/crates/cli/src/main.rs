//! `polylab` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use polylab::bench::{self, BenchConfig, BenchError, DatasetSource, Family, Metric};
use polylab::data::{self, Dataset, LabelColumn};
use polylab::forest::{self, ForestParams, MaxFeatures};
use polylab::metrics::{self, argmax};
use polylab::network::{self, SearchSpace, TrainConfig};
use polylab::partition::{
    self, enumerate_forest_regions_2d, enumerate_layers_2d, label_grid, Box2, CellStats, Model,
    PartitionError, PartitionView, Partitioner, RegionCell, RenderMode, RenderRequest,
};
use polylab::{plot, seed};

#[derive(Parser, Debug)]
#[command(name = "polylab", version, about = "Forests and ReLU networks as partition-and-vote classifiers")]
struct Cli {
    /// Master seed; every random stream is derived from it
    #[arg(long, global = true, env = "POLYLAB_SEED")]
    seed: Option<u64>,

    /// Upper bound on worker threads
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate Gaussian XOR train/test CSVs
    GenXor(GenXorArgs),
    /// Train a forest or network on a CSV and save the model
    Train(TrainArgs),
    /// Render the partition of a 2-D model as SVG
    PartitionMap(PartitionArgs),
    /// Run or resume the learning-curve benchmark
    Bench(BenchArgs),
    /// Plot a benchmark log as a learning-curve SVG
    Plot(PlotArgs),
    /// Summarise a benchmark log as a Markdown table
    Report(ReportArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenXorArgs {
    /// Training rows
    #[arg(long, default_value_t = 4096)]
    n_train: usize,
    /// Test rows
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    /// Standard deviation of every cluster
    #[arg(long, default_value_t = data::DEFAULT_XOR_SIGMA)]
    sigma: f64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    /// Training CSV with a header row
    #[arg(long)]
    data: PathBuf,
    /// Optional held-out CSV scored after training
    #[arg(long)]
    test: Option<PathBuf>,
    /// Label column name or zero-based index
    #[arg(long, default_value = "class")]
    label_column: String,
    /// Model family: forest or network
    #[arg(long)]
    family: String,
    /// Forest: number of trees
    #[arg(long, default_value_t = forest::DEFAULT_TREE_COUNT)]
    trees: usize,
    /// Forest: features per split (sqrt, quarter, third, two-thirds, all or a count)
    #[arg(long, default_value = "sqrt")]
    max_features: String,
    /// Network: comma-separated hidden widths; omit to random-search them
    #[arg(long)]
    hidden: Option<String>,
    /// Network: l2 penalty (searched when --hidden is omitted)
    #[arg(long)]
    l2: Option<f64>,
    /// Network: random-search draws
    #[arg(long, default_value_t = 20)]
    draws: usize,
    /// Network: SGD learning rate
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    /// Network: momentum
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    /// Network: mini-batch size
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// Network: epoch limit
    #[arg(long, default_value_t = 200)]
    max_epochs: usize,
    /// Network: early-stopping patience in epochs
    #[arg(long, default_value_t = 3)]
    patience: usize,
    /// Network: train on raw rather than z-scored inputs
    #[arg(long)]
    no_standardize: bool,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct PartitionArgs {
    /// Model JSON written by `train`
    #[arg(long)]
    model: PathBuf,
    /// CSV used for the window, class tints and the point overlay
    #[arg(long)]
    data: Option<PathBuf>,
    /// Label column of --data
    #[arg(long, default_value = "class")]
    label_column: String,
    /// unique-color, class-tint or layer-overlay
    #[arg(long, default_value = "unique-color")]
    mode: String,
    /// Layers of the code to use; defaults to all
    #[arg(long)]
    layer: Option<usize>,
    /// Grid resolution per side
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Enumerate cells exactly instead of labelling a grid
    #[arg(long)]
    exact: bool,
    /// Window as xmin,ymin,xmax,ymax; defaults to the data box grown by 10%
    #[arg(long)]
    domain: Option<String>,
    /// Draw the data points on top
    #[arg(long)]
    points: bool,
    /// Image side in pixels
    #[arg(long, default_value_t = 512)]
    size: u32,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct BenchArgs {
    /// TOML config; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Add a CSV dataset (repeatable)
    #[arg(long)]
    data: Vec<PathBuf>,
    /// Add a Gaussian XOR dataset with this many rows
    #[arg(long)]
    xor: Option<usize>,
    /// Comma-separated families to run
    #[arg(long)]
    families: Option<String>,
    /// Trees per forest
    #[arg(long)]
    trees: Option<usize>,
    /// Random-search draws per dataset
    #[arg(long)]
    draws: Option<usize>,
    /// Cross-validation folds
    #[arg(long)]
    folds: Option<usize>,
    /// Per-dataset row cap
    #[arg(long)]
    sample_cap: Option<usize>,
    /// Network epoch limit
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct PlotArgs {
    /// JSON-lines log written by `bench`
    #[arg(long)]
    records: PathBuf,
    /// kappa, ece or time
    #[arg(long, default_value = "kappa")]
    metric: String,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ReportArgs {
    /// JSON-lines log written by `bench`
    #[arg(long)]
    records: PathBuf,
    /// Also write report.md here
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome<T> = Result<T, Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a C,
    files: Vec<String>,
}

fn announce<C: Serialize>(config: &C, seed: u64) {
    let json = serde_json::to_string(config).unwrap_or_default();
    println!("config: {json}");
    println!("seed: {seed}");
}

fn write_manifest<C: Serialize>(
    out: &Path,
    command: &str,
    seed: u64,
    config: &C,
    files: &[PathBuf],
) -> Outcome<()> {
    let mut names: Vec<String> = files
        .iter()
        .map(|f| {
            f.strip_prefix(out)
                .unwrap_or(f)
                .to_string_lossy()
                .replace('\\', "/")
        })
        .collect();
    names.sort();
    names.dedup();
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config,
        files: names,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
    std::fs::write(out.join("manifest.json"), text + "\n").map_err(runtime)
}

fn create_out(out: &Path) -> Outcome<()> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(runtime)
}

fn load(path: &Path, label: &str) -> Outcome<Dataset> {
    let column: LabelColumn = label.parse().expect("infallible");
    data::load_csv(path, &column).map_err(|e| match e {
        data::DataError::Io(_) => runtime(e),
        other => usage(other),
    })
}

fn gen_xor(args: &GenXorArgs, seed: u64) -> Outcome<()> {
    announce(args, seed);
    let (train, test) = data::gen_gaussian_xor(args.n_train, args.n_test, args.sigma, seed)
        .map_err(usage)?;
    create_out(&args.out)?;
    let files = [args.out.join("train.csv"), args.out.join("test.csv")];
    data::save_csv(&train, &files[0]).map_err(runtime)?;
    data::save_csv(&test, &files[1]).map_err(runtime)?;
    let bayes = data::xor_bayes_accuracy(args.sigma, 1.0 + 10.0 * args.sigma, args.sigma / 100.0);
    println!("bayes accuracy (quadrature): {bayes:.6}");
    println!("wrote {} train and {} test rows", train.len(), test.len());
    write_manifest(&args.out, "gen-xor", seed, args, &files)
}

#[derive(Serialize)]
struct TrainSummary {
    family: String,
    params: serde_json::Value,
    train_rows: usize,
    train_seconds: f64,
    test_accuracy: Option<f64>,
    test_kappa: Option<f64>,
    test_ece: Option<f64>,
}

fn parse_hidden(s: &str) -> Outcome<Vec<usize>> {
    s.split(',')
        .map(|w| w.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(anyhow!("--hidden `{s}`: {e}")))
}

fn train_cmd(args: &TrainArgs, seed: u64) -> Outcome<()> {
    announce(args, seed);
    let ds = load(&args.data, &args.label_column)?;
    let test = args
        .test
        .as_ref()
        .map(|p| load(p, &args.label_column))
        .transpose()?;
    create_out(&args.out)?;

    let (model, params, secs) = match args.family.as_str() {
        "forest" => {
            let mf: MaxFeatures = args.max_features.parse().map_err(|e: String| usage(anyhow!(e)))?;
            let params = ForestParams::new(args.trees, mf.resolve(ds.dim()));
            let (m, secs) = metrics::timed(|| {
                forest::train_forest(&ds, &params, seed::substream(seed, "model", 0))
            });
            let m = m.map_err(usage)?;
            (Model::Forest(m), serde_json::to_value(&params).map_err(runtime)?, secs)
        }
        "network" => {
            let base = TrainConfig {
                learning_rate: args.learning_rate,
                momentum: args.momentum,
                batch_size: args.batch_size,
                max_epochs: args.max_epochs,
                patience: args.patience,
                standardize: !args.no_standardize,
                seed: seed::substream(seed, "model", 0),
                ..TrainConfig::default()
            };
            let (arch, l2, search) = match &args.hidden {
                Some(h) => (parse_hidden(h)?, args.l2.unwrap_or(base.l2), None),
                None => {
                    let space = SearchSpace {
                        draws: args.draws,
                        ..SearchSpace::default()
                    };
                    let r = network::random_search(
                        &ds,
                        &space,
                        data::DEFAULT_FOLDS,
                        &base,
                        seed::substream(seed, "search", 0),
                    )
                    .map_err(usage)?;
                    println!("search picked arch {:?} l2 {:.3e}", r.arch, r.l2);
                    (r.arch.clone(), args.l2.unwrap_or(r.l2), Some(r))
                }
            };
            let cfg = TrainConfig { l2, ..base };
            let (m, secs) = metrics::timed(|| network::train(&ds, &arch, &cfg));
            let m = m.map_err(usage)?;
            let params = serde_json::json!({ "hidden": arch, "train": cfg, "search": search });
            (Model::Network(m), params, secs)
        }
        other => return Err(usage(anyhow!("unknown family `{other}` (forest or network)"))),
    };

    let mut summary = TrainSummary {
        family: args.family.clone(),
        params,
        train_rows: ds.len(),
        train_seconds: secs,
        test_accuracy: None,
        test_kappa: None,
        test_ece: None,
    };
    if let Some(test) = &test {
        let probs: Vec<Vec<f64>> = test
            .rows()
            .map(|x| Partitioner::posterior(&model, x))
            .collect::<Result<_, _>>()
            .map_err(usage)?;
        let preds: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
        let classes = ds.class_count().max(test.class_count());
        summary.test_accuracy = Some(metrics::accuracy(&preds, test.labels()).map_err(runtime)?);
        summary.test_kappa =
            Some(metrics::kappa_from_labels(test.labels(), &preds, classes).map_err(runtime)?);
        summary.test_ece = Some(
            metrics::ece(&probs, test.labels(), metrics::DEFAULT_ECE_BINS).map_err(runtime)?,
        );
        println!(
            "test accuracy {:.4} kappa {:.4} ece {:.4}",
            summary.test_accuracy.unwrap_or(0.0),
            summary.test_kappa.unwrap_or(0.0),
            summary.test_ece.unwrap_or(0.0)
        );
    }
    let files = [args.out.join("model.json"), args.out.join("summary.json")];
    std::fs::write(&files[0], serde_json::to_string(&model).map_err(runtime)?).map_err(runtime)?;
    std::fs::write(&files[1], serde_json::to_string_pretty(&summary).map_err(runtime)? + "\n")
        .map_err(runtime)?;
    println!("trained {} in {secs:.3}s", args.family);
    write_manifest(&args.out, "train", seed, args, &files)
}

fn parse_domain(s: &str) -> Outcome<Box2> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| usage(anyhow!("--domain `{s}`: {e}")))?;
    if v.len() != 4 || !(v[2] > v[0] && v[3] > v[1]) {
        return Err(usage(anyhow!("--domain expects xmin,ymin,xmax,ymax with min < max")));
    }
    Ok(Box2::new([v[0], v[1]], [v[2], v[3]]))
}

fn partition_failure(e: PartitionError) -> Failure {
    match e {
        PartitionError::TooManyCells(_) => runtime(e),
        other => usage(other),
    }
}

/// Region statistics: training-point frequencies when data is given,
/// otherwise the model's own posterior at a representative point.
fn region_stats(
    model: &Model,
    ds: Option<&Dataset>,
    codes: &[partition::ActivationCode],
    reps: &[[f64; 2]],
    layer: usize,
) -> Outcome<Vec<CellStats>> {
    match ds {
        Some(ds) => partition::cell_posteriors(codes, model, ds, layer).map_err(partition_failure),
        None => reps
            .iter()
            .map(|p| {
                Ok(CellStats {
                    counts: Vec::new(),
                    posterior: Some(Partitioner::posterior(model, p).map_err(partition_failure)?),
                })
            })
            .collect(),
    }
}

fn partition_cmd(args: &PartitionArgs, seed: u64) -> Outcome<()> {
    announce(args, seed);
    let mode: RenderMode = args.mode.parse().map_err(|e: String| usage(anyhow!(e)))?;
    let text = std::fs::read_to_string(&args.model)
        .with_context(|| format!("reading {}", args.model.display()))
        .map_err(runtime)?;
    let model: Model = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.model.display()))
        .map_err(usage)?;
    if model.input_dim() != 2 {
        return Err(usage(PartitionError::NotTwoDimensional(model.input_dim())));
    }
    let ds = args
        .data
        .as_ref()
        .map(|p| load(p, &args.label_column))
        .transpose()?;
    let domain = match (&args.domain, &ds) {
        (Some(s), _) => parse_domain(s)?,
        (None, Some(ds)) => partition::default_domain(ds).map_err(partition_failure)?,
        (None, None) => return Err(usage(anyhow!("--domain or --data is required"))),
    };
    let layer = args.layer.unwrap_or_else(|| model.layer_depth());
    if layer > model.layer_depth() {
        return Err(usage(PartitionError::LayerOutOfRange {
            limit: layer,
            depth: model.layer_depth(),
        }));
    }
    create_out(&args.out)?;
    let points = if args.points { ds.as_ref() } else { None };

    let svg = if args.exact {
        // one snapshot per layer; the last is rendered, coarser ones overlaid
        let snapshots: Vec<Vec<RegionCell>> = match &model {
            Model::Network(net) => enumerate_layers_2d(net, &domain, layer),
            Model::Forest(f) => (0..=layer)
                .map(|l| enumerate_forest_regions_2d(f, &domain, l))
                .collect(),
        }
        .map_err(partition_failure)?;
        let cells = snapshots.last().expect("non-empty");
        let codes: Vec<_> = cells.iter().map(|c| c.code.clone()).collect();
        let reps: Vec<[f64; 2]> = cells.iter().map(|c| c.witness).collect();
        let stats = region_stats(&model, ds.as_ref(), &codes, &reps, layer)?;
        let mut with_stats = cells.clone();
        for (c, s) in with_stats.iter_mut().zip(&stats) {
            c.stats = Some(s.clone());
        }
        let inventory = partition::region_inventory(&with_stats);
        std::fs::write(
            args.out.join("regions.json"),
            serde_json::to_string_pretty(&inventory).map_err(runtime)? + "\n",
        )
        .map_err(runtime)?;
        println!("{} regions (exact)", cells.len());
        let mut req = RenderRequest::new(PartitionView::Cells { domain, cells });
        req.stats = Some(&stats);
        req.points = points;
        req.size = args.size;
        req.overlays = snapshots[1.min(snapshots.len() - 1)..snapshots.len() - 1]
            .iter()
            .map(|c| PartitionView::Cells { domain, cells: c })
            .collect();
        partition::partition_svg(&req, mode)
    } else {
        let grid = label_grid(&model, &domain, args.grid, layer).map_err(partition_failure)?;
        let mut reps = vec![[0.0; 2]; grid.region_count()];
        let mut seen = vec![false; grid.region_count()];
        for row in 0..grid.resolution {
            for col in 0..grid.resolution {
                let id = grid.id(row, col);
                if !seen[id] {
                    seen[id] = true;
                    reps[id] = grid.center(row, col);
                }
            }
        }
        let stats = region_stats(&model, ds.as_ref(), &grid.codes, &reps, layer)?;
        let coarse: Vec<_> = if mode == RenderMode::LayerOverlay {
            (1..layer).map(|l| grid.coarsened(l)).collect()
        } else {
            Vec::new()
        };
        println!("{} regions on a {}x{} grid", grid.region_count(), args.grid, args.grid);
        let mut req = RenderRequest::new(PartitionView::Grid(&grid));
        req.stats = Some(&stats);
        req.points = points;
        req.size = args.size;
        req.overlays = coarse.iter().map(PartitionView::Grid).collect();
        partition::partition_svg(&req, mode)
    };
    let mut files = vec![args.out.join("partition.svg")];
    std::fs::write(&files[0], svg).map_err(runtime)?;
    if args.exact {
        files.push(args.out.join("regions.json"));
    }
    write_manifest(&args.out, "partition-map", seed, args, &files)
}

fn bench_failure(e: BenchError) -> Failure {
    match e {
        BenchError::Config(_) | BenchError::Toml(_) | BenchError::Data { .. } => usage(e),
        other => runtime(other),
    }
}

fn bench_config(args: &BenchArgs, seed: Option<u64>, jobs: Option<usize>) -> Outcome<BenchConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(usage)?;
            let mut cfg: BenchConfig = toml::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(usage)?;
            let base = path.parent().unwrap_or(Path::new("."));
            for ds in &mut cfg.datasets {
                if let DatasetSource::Csv { path, .. } = ds {
                    if path.is_relative() {
                        *path = base.join(&*path);
                    }
                }
            }
            cfg
        }
        None => BenchConfig::default(),
    };
    for path in &args.data {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "data".into());
        cfg.datasets.push(DatasetSource::Csv {
            name,
            path: path.clone(),
            label_column: LabelColumn::default(),
        });
    }
    if let Some(n) = args.xor {
        cfg.datasets.push(DatasetSource::Xor {
            name: "xor".into(),
            n,
            sigma: data::DEFAULT_XOR_SIGMA,
        });
    }
    if let Some(f) = &args.families {
        cfg.families = f
            .split(',')
            .map(|s| s.trim().parse::<Family>())
            .collect::<Result<_, _>>()
            .map_err(|e| usage(anyhow!(e)))?;
    }
    if let Some(t) = args.trees {
        cfg.forest.tree_count = t;
    }
    if let Some(d) = args.draws {
        cfg.network.search.draws = d;
    }
    if let Some(k) = args.folds {
        cfg.folds = k;
    }
    if let Some(c) = args.sample_cap {
        cfg.sample_cap = c;
    }
    if let Some(e) = args.max_epochs {
        cfg.network.train.max_epochs = e;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    cfg.validate().map_err(bench_failure)?;
    Ok(cfg)
}

fn bench_cmd(args: &BenchArgs, seed: Option<u64>, jobs: Option<usize>) -> Outcome<()> {
    let cfg = bench_config(args, seed, jobs)?;
    announce(&cfg, cfg.seed);
    let outcome = bench::run_benchmark(&cfg).map_err(bench_failure)?;
    for (name, schedule) in &outcome.schedules {
        println!("{name}: sizes {:?}{}", schedule.sizes, if schedule.degenerate { " (degenerate)" } else { "" });
    }
    let failed = outcome.records.iter().filter(|r| !r.is_ok()).count();
    println!(
        "{} records ({} failed), {} new training runs",
        outcome.records.len(),
        failed,
        outcome.new_runs
    );
    write_manifest(&cfg.output_dir, "bench", cfg.seed, &cfg, &outcome.files)
}

fn plot_cmd(args: &PlotArgs, seed: u64) -> Outcome<()> {
    announce(args, seed);
    let metric: Metric = args.metric.parse().map_err(|e: String| usage(anyhow!(e)))?;
    create_out(&args.out)?;
    let path = args.out.join(format!("{}.svg", metric.as_str()));
    plot::plot_file(&args.records, metric, &path).map_err(runtime)?;
    println!("wrote {}", path.display());
    write_manifest(&args.out, "plot", seed, args, &[path])
}

fn report_cmd(args: &ReportArgs, seed: u64) -> Outcome<()> {
    announce(args, seed);
    let records = bench::read_records(&args.records).map_err(runtime)?;
    let text = match bench::aggregate(&records) {
        Ok(groups) => bench::report_markdown(&groups),
        Err(BenchError::Empty) => "no records\n".to_string(),
        Err(e) => return Err(runtime(e)),
    };
    print!("{text}");
    if let Some(out) = &args.out {
        create_out(out)?;
        let path = out.join("report.md");
        std::fs::write(&path, &text).map_err(runtime)?;
        write_manifest(out, "report", seed, args, &[path])?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(usage(anyhow!("--jobs must be at least 1")));
        }
        // a second initialisation only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::GenXor(a) => gen_xor(a, seed),
        Command::Train(a) => train_cmd(a, seed),
        Command::PartitionMap(a) => partition_cmd(a, seed),
        Command::Bench(a) => bench_cmd(a, cli.seed, cli.jobs),
        Command::Plot(a) => plot_cmd(a, seed),
        Command::Report(a) => report_cmd(a, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
