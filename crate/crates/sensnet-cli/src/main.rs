//! Command-line front end: train networks, measure sensitivity metrics on
//! checkpoints, generate trajectories, tabulate per-point bounds, and drive
//! the config-based studies.
//!
//! Every run is deterministic in its config and `--seed`; CSV and checkpoint
//! outputs are byte-stable across re-runs.

use std::fs::File;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use sensnet::data::Dataset;
use sensnet::harness::{
    parse_config, run_boundary_study, run_paired_factor, run_per_point, run_sweep,
    run_trajectory_study, DataSource, DatasetSpec, ExperimentSpec, NetworkGrid, OptimizerGrid,
    Precision, StudyKind, PER_POINT_HEADER,
};
use sensnet::nn::{load_checkpoint, save_checkpoint, Mlp};
use sensnet::sensitivity::{
    boundary_map, count_transitions, curvature_estimate, jacobian_norm, sensitivity_profile,
    BoundaryMap,
};
use sensnet::train::{train, LossKind};
use sensnet::trajectory::{
    data_fitted_ellipse, plane_grid, random_ellipse, translation_trajectory, Trajectory,
};
use sensnet::{seeds, Error, Result, Scalar};

#[derive(Parser)]
#[command(
    name = "sensnet",
    version,
    about = "Train small classifiers and measure their input sensitivity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single network and write a checkpoint plus a run summary.
    Train(TrainArgs),
    /// Measure a sensitivity metric on a trained checkpoint.
    Measure(MeasureArgs),
    /// Generate a closed trajectory's sample points as CSV.
    Trajectory(TrajectoryArgs),
    /// Tabulate per-point sensitivities against loss-level bounds.
    Bounds(BoundsArgs),
    /// Run a config-driven study.
    Study(StudyArgs),
}

/// Dataset flags shared by commands; they override the `[dataset]` section
/// of `--config` when given.
#[derive(Args)]
struct DataArgs {
    /// IDX image file for the training split.
    #[arg(long)]
    train_images: Option<PathBuf>,
    /// IDX label file for the training split.
    #[arg(long)]
    train_labels: Option<PathBuf>,
    /// IDX image file for the test split.
    #[arg(long)]
    test_images: Option<PathBuf>,
    /// IDX label file for the test split.
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// Use generated Gaussian-blob data instead of IDX files.
    #[arg(long)]
    synthetic: bool,
}

impl DataArgs {
    fn apply(&self, spec: &mut ExperimentSpec) {
        if self.synthetic {
            spec.dataset.source = DataSource::Synthetic;
        }
        let any_idx = self.train_images.is_some()
            || self.train_labels.is_some()
            || self.test_images.is_some()
            || self.test_labels.is_some();
        if any_idx {
            spec.dataset.source = DataSource::Idx;
            if let Some(p) = &self.train_images {
                spec.dataset.train_images = Some(p.clone());
            }
            if let Some(p) = &self.train_labels {
                spec.dataset.train_labels = Some(p.clone());
            }
            if let Some(p) = &self.test_images {
                spec.dataset.test_images = Some(p.clone());
            }
            if let Some(p) = &self.test_labels {
                spec.dataset.test_labels = Some(p.clone());
            }
            // Commands that only read one split still need both pairs to load;
            // mirror a lone pair into the missing slots.
            if spec.dataset.train_images.is_none() && spec.dataset.train_labels.is_none() {
                spec.dataset.train_images = spec.dataset.test_images.clone();
                spec.dataset.train_labels = spec.dataset.test_labels.clone();
            }
            if spec.dataset.test_images.is_none() && spec.dataset.test_labels.is_none() {
                spec.dataset.test_images = spec.dataset.train_images.clone();
                spec.dataset.test_labels = spec.dataset.train_labels.clone();
            }
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config (single-cell grid); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; replaces the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint output path; a `<out>.json` run summary sits next to it.
    #[arg(long, default_value = "checkpoint.snet")]
    out: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    /// Per-point Jacobian norms over the test set.
    Jacobian,
    /// Region-code transitions along a trajectory.
    Transitions,
    /// Accumulated Jacobian change along a trajectory.
    Curvature,
    /// Windowed Jacobian-norm / transition profile along a trajectory.
    Profile,
    /// Region labels and boundary mask over a data plane.
    Boundary,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TrajKindArg {
    /// Origin-centered random ellipse.
    RandomEllipse,
    /// Ellipse through three data points of distinct classes.
    DataEllipse,
    /// Horizontal wrap-around translation of a data image.
    Translation,
}

#[derive(Args)]
struct MeasureArgs {
    /// Checkpoint to measure.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Which metric to compute.
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// Trajectory generator for trajectory-based metrics.
    #[arg(long, value_enum, default_value = "random-ellipse")]
    trajectory: TrajKindArg,
    /// Samples per closed loop; defaults to the config's `trajectory.k`.
    #[arg(long)]
    k: Option<usize>,
    /// Profile window; defaults to the config's `trajectory.window`.
    #[arg(long)]
    window: Option<usize>,
    /// Experiment config supplying dataset and measurement settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; replaces the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path (grids derive `_labels`/`_mask` files from it).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct TrajectoryArgs {
    /// Trajectory generator.
    #[arg(long, value_enum, default_value = "random-ellipse")]
    trajectory: TrajKindArg,
    /// Samples per closed loop.
    #[arg(long)]
    k: Option<usize>,
    /// Input dimension for random ellipses without a dataset.
    #[arg(long)]
    dim: Option<usize>,
    /// Experiment config supplying dataset and trajectory settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; replaces the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct BoundsArgs {
    /// Checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Loss to tabulate: cross_entropy or l2.
    #[arg(long, default_value = "cross_entropy")]
    loss: String,
    /// Experiment config supplying dataset settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; replaces the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct StudyArgs {
    #[command(subcommand)]
    kind: StudyCommand,
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Sensitivity profiles along closed trajectories, averaged over seeds.
    Trajectory(StudyRunArgs),
    /// Region maps of a data plane before and after training.
    Boundary(StudyRunArgs),
    /// Two-sided comparison across one factor (labels, augmentation, …).
    Paired(StudyRunArgs),
    /// Train and measure every grid cell × seed.
    Sweep(StudyRunArgs),
    /// Per-point sensitivities against loss-level bounds.
    PerPoint(StudyRunArgs),
}

#[derive(Args)]
struct StudyRunArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Root seed; replaces the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Measure(args) => cmd_measure(args),
        Command::Trajectory(args) => cmd_trajectory(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Study(args) => cmd_study(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

/// Baseline spec used when no `--config` is given: synthetic-friendly
/// defaults with a single-cell grid and seed 0.
fn default_spec() -> ExperimentSpec {
    ExperimentSpec {
        kind: StudyKind::Sweep,
        precision: Precision::default(),
        output: None,
        dataset: DatasetSpec::default(),
        network: NetworkGrid::default(),
        optimizer: OptimizerGrid::default(),
        seeds: vec![0],
        factor: None,
        trajectory: Default::default(),
        measure: Default::default(),
        augment: Default::default(),
        boundary: Default::default(),
        per_point: Default::default(),
    }
}

fn load_spec(
    config: &Option<PathBuf>,
    seed: Option<u64>,
    data: &DataArgs,
) -> Result<ExperimentSpec> {
    let mut spec = match config {
        Some(path) => parse_config(path)?,
        None => default_spec(),
    };
    data.apply(&mut spec);
    if let Some(s) = seed {
        spec.seeds = vec![s];
    }
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn cmd_train(args: TrainArgs) -> Result<()> {
    let spec = load_spec(&args.config, args.seed, &args.data)?;
    match spec.precision {
        Precision::F64 => train_run::<f64>(&spec, &args.out),
        Precision::F32 => train_run::<f32>(&spec, &args.out),
    }
}

fn train_run<F: Scalar>(spec: &ExperimentSpec, out: &Path) -> Result<()> {
    let cell = spec.single_cell()?;
    let (train_ds, test_ds) = spec.resolve_datasets::<F>()?;
    let seed = spec.seeds[0];
    let net = Mlp::<F>::init(
        &cell.layer_widths(train_ds.dim(), train_ds.n_classes()),
        cell.activation,
        cell.init_multiplier,
        seeds::derive(seed, "init", cell.index as u64),
    )?;
    let cfg = spec.optimizer_config(&cell, train_ds.len());
    let outcome = train(
        net,
        &train_ds,
        &test_ds,
        &cfg,
        spec.optimizer.loss,
        None,
        seeds::derive(seed, "train", cell.index as u64),
    )?;
    save_checkpoint(&outcome.network, out)?;

    let summary = serde_json::json!({
        "checkpoint": out.display().to_string(),
        "seed": seed,
        "width": cell.width,
        "depth": cell.depth,
        "activation": cell.activation.to_string(),
        "optimizer": cell.optimizer.to_string(),
        "learning_rate": cell.learning_rate,
        "batch_size": cell.batch_label(),
        "loss": spec.optimizer.loss.to_string(),
        "steps_run": outcome.steps_run,
        "train_accuracy": outcome.train_accuracy,
        "test_accuracy": outcome.test_accuracy,
        "generalization_gap": outcome.generalization_gap,
        "fit_train_exactly": outcome.fit_train_exactly,
        "final_loss": outcome.loss_history.last().copied(),
    });
    let summary_path = PathBuf::from(format!("{}.json", out.display()));
    std::fs::write(&summary_path, format!("{summary:#}\n"))?;
    println!(
        "trained {} steps: train accuracy {:.4}, test accuracy {:.4}, gap {:.4}",
        outcome.steps_run,
        outcome.train_accuracy,
        outcome.test_accuracy,
        outcome.generalization_gap
    );
    println!("checkpoint: {}", out.display());
    println!("summary: {}", summary_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// measure
// ---------------------------------------------------------------------------

fn cmd_measure(args: MeasureArgs) -> Result<()> {
    let spec = load_spec(&args.config, args.seed, &args.data)?;
    match spec.precision {
        Precision::F64 => measure_run::<f64>(&spec, &args),
        Precision::F32 => measure_run::<f32>(&spec, &args),
    }
}

/// Loads the dataset pair when the metric needs data; `measure` works from
/// the test split.
fn measure_test_set<F: Scalar>(spec: &ExperimentSpec) -> Result<Dataset<F>> {
    let (_, test_ds) = spec.resolve_datasets::<F>()?;
    Ok(test_ds)
}

/// First examples of three distinct classes, in scan order — a
/// deterministic anchor choice that needs no seed.
fn first_three_classes<F: Scalar>(ds: &Dataset<F>) -> Result<[usize; 3]> {
    let mut seen: Vec<usize> = Vec::new();
    let mut anchors = Vec::new();
    for (i, &y) in ds.labels().iter().enumerate() {
        if !seen.contains(&y) {
            seen.push(y);
            anchors.push(i);
            if anchors.len() == 3 {
                return Ok([anchors[0], anchors[1], anchors[2]]);
            }
        }
    }
    Err(Error::DegenerateInput(format!(
        "plane and ellipse anchors need 3 distinct classes, found {}",
        anchors.len()
    )))
}

fn build_trajectory<F: Scalar>(
    kind: TrajKindArg,
    spec: &ExperimentSpec,
    d: usize,
    test_ds: &Dataset<F>,
    k: usize,
    seed: u64,
) -> Result<Trajectory<F>> {
    match kind {
        TrajKindArg::RandomEllipse => random_ellipse(d, k, seeds::derive(seed, "ellipse", 0)),
        TrajKindArg::DataEllipse => {
            let [a, b, c] = first_three_classes(test_ds)?;
            data_fitted_ellipse(test_ds.input(a), test_ds.input(b), test_ds.input(c), k, seed)
        }
        TrajKindArg::Translation => {
            let (w, h) = spec.dataset.image_dims(test_ds.dim())?;
            translation_trajectory(test_ds.input(0), w, h, k)
        }
    }
}

fn measure_run<F: Scalar>(spec: &ExperimentSpec, args: &MeasureArgs) -> Result<()> {
    let net = load_checkpoint::<F>(&args.checkpoint)?;
    let seed = spec.seeds[0];
    let k = args.k.unwrap_or(spec.trajectory.k);

    match args.metric {
        MetricArg::Jacobian => {
            let test_ds = measure_test_set::<F>(spec)?;
            if test_ds.dim() != net.input_dim() {
                return Err(Error::Shape(format!(
                    "checkpoint expects d = {}, test data has d = {}",
                    net.input_dim(),
                    test_ds.dim()
                )));
            }
            let mut norms = Vec::with_capacity(test_ds.len());
            for i in 0..test_ds.len() {
                norms.push(jacobian_norm(&net, test_ds.input(i))?.as_f64());
            }
            let mean = norms.iter().sum::<f64>() / norms.len() as f64;
            if let Some(out) = &args.out {
                let mut w = csvout::writer(out)?;
                w.write_record(["point_id", "jacobian_norm"])?;
                for (i, n) in norms.iter().enumerate() {
                    w.write_record(&[i.to_string(), format!("{n}")])?;
                }
                w.flush()?;
                println!("wrote {}", out.display());
            }
            println!("mean jacobian norm over {} test points: {mean}", norms.len());
        }
        MetricArg::Transitions => {
            let test_ds = measure_test_set::<F>(spec)?;
            let t = build_trajectory(args.trajectory, spec, net.input_dim(), &test_ds, k, seed)?;
            let count = count_transitions(&net, &t)?;
            if let Some(out) = &args.out {
                let mut w = csvout::writer(out)?;
                w.write_record(["arc_index", "transitions"])?;
                for (i, c) in count.per_arc.iter().enumerate() {
                    w.write_record(&[i.to_string(), c.to_string()])?;
                }
                w.flush()?;
                println!("wrote {}", out.display());
            }
            println!("transitions over {} samples: {}", count.k_used, count.total);
        }
        MetricArg::Curvature => {
            let test_ds = measure_test_set::<F>(spec)?;
            let t = build_trajectory(args.trajectory, spec, net.input_dim(), &test_ds, k, seed)?;
            let c = curvature_estimate(&net, &t)?.as_f64();
            if let Some(out) = &args.out {
                let mut w = csvout::writer(out)?;
                w.write_record(["k", "curvature"])?;
                w.write_record(&[k.to_string(), format!("{c}")])?;
                w.flush()?;
                println!("wrote {}", out.display());
            }
            println!("curvature over {k} samples: {c}");
        }
        MetricArg::Profile => {
            let test_ds = measure_test_set::<F>(spec)?;
            let t = build_trajectory(args.trajectory, spec, net.input_dim(), &test_ds, k, seed)?;
            let window = args.window.unwrap_or(spec.trajectory.window);
            let profile = sensitivity_profile(&net, &t, window)?;
            let buckets = profile.window_transitions.len();
            if let Some(out) = &args.out {
                let mut w = csvout::writer(out)?;
                w.write_record([
                    "window_index",
                    "window_start",
                    "mean_jacobian_norm",
                    "transitions",
                ])?;
                for b in 0..buckets {
                    let bucket = &profile.jacobian_norms[b * window..(b + 1) * window];
                    let mean =
                        bucket.iter().map(|v| v.as_f64()).sum::<f64>() / window as f64;
                    w.write_record(&[
                        b.to_string(),
                        (b * window).to_string(),
                        format!("{mean}"),
                        profile.window_transitions[b].to_string(),
                    ])?;
                }
                w.flush()?;
                println!("wrote {}", out.display());
            }
            let total: u64 = profile.window_transitions.iter().sum();
            println!("profile: {buckets} windows of {window} samples, {total} transitions");
        }
        MetricArg::Boundary => {
            let test_ds = measure_test_set::<F>(spec)?;
            let [a, b, c] = first_three_classes(&test_ds)?;
            let grid = plane_grid(
                test_ds.input(a),
                test_ds.input(b),
                test_ds.input(c),
                spec.boundary.resolution,
            )?;
            let map = boundary_map(&net, &grid, spec.boundary.layer.into())?;
            if let Some(out) = &args.out {
                let (labels_path, mask_path) = grid_paths(out);
                write_label_grid(&labels_path, &map)?;
                write_mask_grid(&mask_path, &map)?;
                println!("wrote {}", labels_path.display());
                println!("wrote {}", mask_path.display());
            }
            let boundary_cells = map.mask.iter().filter(|&&m| m).count();
            let r = map.resolution;
            println!(
                "{} regions over a {r}x{r} grid, {boundary_cells} boundary cells",
                map.region_count,
            );
        }
    }
    Ok(())
}

/// `out.csv` → (`out_labels.csv`, `out_mask.csv`).
fn grid_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "grid".into());
    let parent = out.parent().unwrap_or_else(|| Path::new(""));
    (
        parent.join(format!("{stem}_labels.csv")),
        parent.join(format!("{stem}_mask.csv")),
    )
}

fn write_label_grid(path: &Path, map: &BoundaryMap) -> Result<()> {
    let mut w = csvout::grid_writer(path)?;
    for gy in 0..map.resolution {
        let row: Vec<String> = (0..map.resolution)
            .map(|gx| map.labels[gy * map.resolution + gx].to_string())
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_mask_grid(path: &Path, map: &BoundaryMap) -> Result<()> {
    let mut w = csvout::grid_writer(path)?;
    for gy in 0..map.resolution {
        let row: Vec<String> = (0..map.resolution)
            .map(|gx| if map.mask[gy * map.resolution + gx] { "1" } else { "0" }.into())
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// trajectory
// ---------------------------------------------------------------------------

fn cmd_trajectory(args: TrajectoryArgs) -> Result<()> {
    let spec = load_spec(&args.config, args.seed, &args.data)?;
    match spec.precision {
        Precision::F64 => trajectory_run::<f64>(&spec, &args),
        Precision::F32 => trajectory_run::<f32>(&spec, &args),
    }
}

/// The trajectory command accepts either split; it prefers the training
/// split and falls back to synthetic generation for `--synthetic`.
fn trajectory_data<F: Scalar>(spec: &ExperimentSpec) -> Result<Dataset<F>> {
    let (train_ds, _) = spec.resolve_datasets::<F>()?;
    Ok(train_ds)
}

fn trajectory_run<F: Scalar>(spec: &ExperimentSpec, args: &TrajectoryArgs) -> Result<()> {
    let seed = spec.seeds[0];
    let k = args.k.unwrap_or(spec.trajectory.k);
    let t: Trajectory<F> = match args.trajectory {
        TrajKindArg::RandomEllipse => {
            let d = args.dim.unwrap_or(64);
            random_ellipse(d, k, seeds::derive(seed, "ellipse", 0))?
        }
        TrajKindArg::DataEllipse => {
            let ds = trajectory_data::<F>(spec)?;
            let [a, b, c] = first_three_classes(&ds)?;
            data_fitted_ellipse(ds.input(a), ds.input(b), ds.input(c), k, seed)?
        }
        TrajKindArg::Translation => {
            let ds = trajectory_data::<F>(spec)?;
            let (w, h) = spec.dataset.image_dims(ds.dim())?;
            translation_trajectory(ds.input(0), w, h, k)?
        }
    };

    let mut file = File::create(&args.out)?;
    if let Some(anchors) = t.anchor_indices() {
        let list: Vec<String> = anchors.iter().map(|i| i.to_string()).collect();
        writeln!(file, "# anchor sample indices: {}", list.join(" "))?;
    }
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["sample_index".to_string()];
    header.extend((0..t.dim()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for i in 0..t.k() {
        let mut row = vec![i.to_string()];
        row.extend(t.point(i).iter().map(|v| format!("{}", v.as_f64())));
        w.write_record(&row)?;
    }
    w.flush()?;
    println!("wrote {} samples of dimension {} to {}", t.k(), t.dim(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

fn cmd_bounds(args: BoundsArgs) -> Result<()> {
    let spec = load_spec(&args.config, args.seed, &args.data)?;
    match spec.precision {
        Precision::F64 => bounds_run::<f64>(&spec, &args),
        Precision::F32 => bounds_run::<f32>(&spec, &args),
    }
}

fn bounds_run<F: Scalar>(spec: &ExperimentSpec, args: &BoundsArgs) -> Result<()> {
    let net = load_checkpoint::<F>(&args.checkpoint)?;
    let loss: LossKind = args.loss.parse()?;
    let (_, test_ds) = spec.resolve_datasets::<F>()?;
    let report = sensnet::bounds::per_point_report(&net, &test_ds, loss)?;

    if let Some(out) = &args.out {
        let mut file = File::create(out)?;
        writeln!(
            file,
            "# M = {} estimated over all {} test points",
            report.context.m_constant,
            report.rows.len()
        )?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(PER_POINT_HEADER)?;
        for row in &report.rows {
            w.write_record(&[
                row.point_id.to_string(),
                format!("{}", row.loss),
                format!("{}", row.jy_actual),
                format!("{}", row.full_actual),
                format!("{}", row.jy_lower),
                format!("{}", row.jy_upper),
                format!("{}", row.full_lower),
                format!("{}", row.full_approx),
                format!("{}", report.context.m_constant),
                report.context.n_classes.to_string(),
            ])?;
        }
        w.flush()?;
        println!("wrote {}", out.display());
    }
    println!(
        "M = {} over {} points, n = {} classes",
        report.context.m_constant,
        report.rows.len(),
        report.context.n_classes
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// study
// ---------------------------------------------------------------------------

fn cmd_study(args: StudyArgs) -> Result<()> {
    let (run_args, expected_kind) = match &args.kind {
        StudyCommand::Trajectory(a) => (a, StudyKind::TrajectoryStudy),
        StudyCommand::Boundary(a) => (a, StudyKind::BoundaryStudy),
        StudyCommand::Paired(a) => (a, StudyKind::PairedFactor),
        StudyCommand::Sweep(a) => (a, StudyKind::Sweep),
        StudyCommand::PerPoint(a) => (a, StudyKind::PerPoint),
    };
    let mut spec = load_spec(&Some(run_args.config.clone()), run_args.seed, &run_args.data)?;
    if let Some(out) = &run_args.out {
        spec.output = Some(out.clone());
    }
    if spec.kind != expected_kind {
        return Err(Error::Config(format!(
            "the config says kind = {}, but this subcommand runs {expected_kind} studies",
            spec.kind
        )));
    }
    match spec.precision {
        Precision::F64 => study_run::<f64>(&spec),
        Precision::F32 => study_run::<f32>(&spec),
    }
}

fn study_run<F: Scalar>(spec: &ExperimentSpec) -> Result<()> {
    match spec.kind {
        StudyKind::Sweep => {
            let rows = run_sweep::<F>(spec)?;
            let diverged = rows.iter().filter(|r| r.diverged).count();
            println!("sweep: {} rows ({diverged} diverged)", rows.len());
        }
        StudyKind::PairedFactor => {
            let rows = run_paired_factor::<F>(spec)?;
            let retained = rows.iter().filter(|r| r.retained).count();
            println!("paired study: {} cells ({retained} retained)", rows.len());
        }
        StudyKind::TrajectoryStudy => {
            let rows = run_trajectory_study::<F>(spec)?;
            println!("trajectory study: {} profile rows", rows.len());
        }
        StudyKind::BoundaryStudy => {
            let result = run_boundary_study::<F>(spec)?;
            println!(
                "boundary study: {} regions before, {} after on a {}x{} grid",
                result.before.region_count,
                result.after.region_count,
                result.resolution,
                result.resolution
            );
        }
        StudyKind::PerPoint => {
            let result = run_per_point::<F>(spec)?;
            println!(
                "per-point study: {} rows, M = {}",
                result.report.rows.len(),
                result.report.context.m_constant
            );
        }
    }
    if let Some(out) = &spec.output {
        println!("output: {}", out.display());
    }
    Ok(())
}

/// Thin csv-writer helpers so command code stays terse.
mod csvout {
    use super::*;

    pub fn writer(path: &Path) -> Result<csv::Writer<File>> {
        Ok(csv::Writer::from_path(path)?)
    }

    pub fn grid_writer(path: &Path) -> Result<csv::Writer<File>> {
        Ok(csv::WriterBuilder::new().has_headers(false).from_path(path)?)
    }
}
