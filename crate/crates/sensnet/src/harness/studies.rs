//! Study runners: each takes a validated [`ExperimentSpec`], fans the
//! hyper-parameter grid out over a worker pool, and merges results back in
//! grid order so re-runs produce byte-identical CSV files.

use std::fs::File;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{per_point_report, PerPointReport};
use crate::data::{randomize_labels, Dataset};
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};
use crate::scalar::Scalar;
use crate::seeds;
use crate::sensitivity::{
    boundary_map, mean_jacobian_norm, mean_transitions, sensitivity_profile, BoundaryMap,
};
use crate::train::{train as train_network, BatchSize, LossKind};
use crate::trajectory::{
    data_fitted_ellipse, plane_grid, random_ellipse, translation_trajectory, Trajectory,
};

use super::config::{
    CellConfig, ExperimentSpec, PairedFactor, StudyKind, TrajectoryKind,
};

fn require_kind(spec: &ExperimentSpec, kind: StudyKind) -> Result<()> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::Config(format!(
            "this runner handles {kind} studies, but the config says kind = {}",
            spec.kind
        )));
    }
    Ok(())
}

fn init_seed(seed: u64, cell_index: usize) -> u64 {
    seeds::derive(seed, "init", cell_index as u64)
}

fn training_seed(seed: u64, cell_index: usize) -> u64 {
    seeds::derive(seed, "train", cell_index as u64)
}

/// Mean Jacobian norm over the fixed measurement subset: the first
/// `measure.jacobian_points` test examples, identical for every row.
fn measured_jacobian_norm<F: Scalar>(
    m: &Mlp<F>,
    test: &Dataset<F>,
    spec: &ExperimentSpec,
) -> Result<f64> {
    let n = spec.measure.jacobian_points.clamp(1, test.len());
    let report = mean_jacobian_norm(m, test.inputs().slice(ndarray::s![..n, ..]))?;
    Ok(report.mean_norm.as_f64())
}

/// Mean transition count over translation trajectories of the first
/// `measure.translation_images` test examples.
fn measured_transitions<F: Scalar>(
    m: &Mlp<F>,
    test: &Dataset<F>,
    spec: &ExperimentSpec,
) -> Result<f64> {
    let (w, h) = spec.dataset.image_dims(test.dim())?;
    let count = spec.measure.translation_images.clamp(1, test.len());
    let mut trajectories = Vec::with_capacity(count);
    for i in 0..count {
        trajectories.push(translation_trajectory(
            test.input(i),
            w,
            h,
            spec.trajectory.k,
        )?);
    }
    mean_transitions(m, &trajectories)
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// The hyper-parameter tuple every study row carries, in the column order
/// `width, depth, activation, init_multiplier, optimizer, learning_rate,
/// batch_size, loss`.
fn cell_fields(cell: &CellConfig, loss: LossKind) -> Vec<String> {
    vec![
        cell.width.to_string(),
        cell.depth.to_string(),
        cell.activation.to_string(),
        fmt_f64(cell.init_multiplier),
        cell.optimizer.to_string(),
        fmt_f64(cell.learning_rate),
        cell.batch_label(),
        loss.to_string(),
    ]
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

/// One sweep row: a (grid cell, seed) pair. Divergent runs keep their row,
/// flagged, with the measurement columns empty.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub config_index: usize,
    pub seed: u64,
    pub cell: CellConfig,
    pub loss: LossKind,
    pub total_steps: usize,
    pub diverged: bool,
    pub divergence_step: Option<usize>,
    pub fit_train_exactly: bool,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub generalization_gap: Option<f64>,
    pub mean_jacobian_norm: Option<f64>,
    pub mean_transitions: Option<f64>,
}

/// Header of the sweep CSV, in column order.
pub const SWEEP_HEADER: [&str; 19] = [
    "config_index",
    "seed",
    "width",
    "depth",
    "activation",
    "init_multiplier",
    "optimizer",
    "learning_rate",
    "batch_size",
    "loss",
    "total_steps",
    "diverged",
    "divergence_step",
    "fit_train_exactly",
    "train_accuracy",
    "test_accuracy",
    "generalization_gap",
    "mean_jacobian_norm",
    "mean_transitions",
];

/// Trains and measures every (cell, seed) pair of the grid, in parallel,
/// and writes `spec.output` if set. Row order is (config index, seed index)
/// regardless of scheduling.
pub fn run_sweep<F: Scalar>(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    require_kind(spec, StudyKind::Sweep)?;
    let (train_ds, test_ds) = spec.resolve_datasets::<F>()?;
    let cells = spec.expand_grid()?;
    let loss = spec.optimizer.loss;

    let jobs: Vec<(CellConfig, u64)> = cells
        .iter()
        .flat_map(|c| spec.seeds.iter().map(move |&s| (c.clone(), s)))
        .collect();

    let rows = jobs
        .into_par_iter()
        .map(|(cell, seed)| -> Result<SweepRow> {
            let widths = cell.layer_widths(train_ds.dim(), train_ds.n_classes());
            let net = Mlp::<F>::init(
                &widths,
                cell.activation,
                cell.init_multiplier,
                init_seed(seed, cell.index),
            )?;
            let cfg = spec.optimizer_config(&cell, train_ds.len());
            let mut row = SweepRow {
                config_index: cell.index,
                seed,
                cell: cell.clone(),
                loss,
                total_steps: cfg.total_steps,
                diverged: false,
                divergence_step: None,
                fit_train_exactly: false,
                train_accuracy: None,
                test_accuracy: None,
                generalization_gap: None,
                mean_jacobian_norm: None,
                mean_transitions: None,
            };
            match train_network(
                net,
                &train_ds,
                &test_ds,
                &cfg,
                loss,
                None,
                training_seed(seed, cell.index),
            ) {
                Ok(outcome) => {
                    row.fit_train_exactly = outcome.fit_train_exactly;
                    row.train_accuracy = Some(outcome.train_accuracy);
                    row.test_accuracy = Some(outcome.test_accuracy);
                    row.generalization_gap = Some(outcome.generalization_gap);
                    row.mean_jacobian_norm =
                        Some(measured_jacobian_norm(&outcome.network, &test_ds, spec)?);
                    row.mean_transitions =
                        Some(measured_transitions(&outcome.network, &test_ds, spec)?);
                }
                Err(Error::Diverged { step, reason }) => {
                    log::warn!(
                        "sweep cell {} seed {seed} diverged at step {step}: {reason}",
                        cell.index
                    );
                    row.diverged = true;
                    row.divergence_step = Some(step);
                }
                Err(e) => return Err(e),
            }
            Ok(row)
        })
        .collect::<Result<Vec<SweepRow>>>()?;

    if let Some(path) = &spec.output {
        let flat: Vec<Vec<String>> = rows.iter().map(sweep_fields).collect();
        write_rows(path, &SWEEP_HEADER, &flat)?;
    }
    Ok(rows)
}

fn sweep_fields(row: &SweepRow) -> Vec<String> {
    let mut fields = vec![row.config_index.to_string(), row.seed.to_string()];
    fields.extend(cell_fields(&row.cell, row.loss));
    fields.extend([
        row.total_steps.to_string(),
        row.diverged.to_string(),
        fmt_opt_usize(row.divergence_step),
        row.fit_train_exactly.to_string(),
        fmt_opt_f64(row.train_accuracy),
        fmt_opt_f64(row.test_accuracy),
        fmt_opt_f64(row.generalization_gap),
        fmt_opt_f64(row.mean_jacobian_norm),
        fmt_opt_f64(row.mean_transitions),
    ]);
    fields
}

// ---------------------------------------------------------------------------
// Paired factor
// ---------------------------------------------------------------------------

/// Measurements for one side of a paired cell.
#[derive(Debug, Clone)]
pub struct PairedSide {
    /// Which side this is, e.g. `true_labels` or `full_batch`.
    pub label: &'static str,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub generalization_gap: f64,
    pub mean_jacobian_norm: f64,
    pub mean_transitions: f64,
    pub fit_train_exactly: bool,
}

/// One paired cell: both sides share the seed, the initialization draw, and
/// every hyper-parameter except the declared factor. A side that diverged is
/// `None`. `retained` applies the fit filter — both sides at 100% train
/// accuracy — which is waived for the augmentation factor.
#[derive(Debug, Clone)]
pub struct PairedResult {
    pub cell_index: usize,
    pub seed: u64,
    pub cell: CellConfig,
    pub loss: LossKind,
    pub factor: PairedFactor,
    pub baseline: Option<PairedSide>,
    pub variant: Option<PairedSide>,
    pub both_fit: bool,
    pub retained: bool,
    /// Empty when retained; otherwise why the cell dropped out.
    pub skip_reason: String,
}

/// Header of the paired-factor CSV, in column order.
pub const PAIRED_HEADER: [&str; 26] = [
    "cell_index",
    "seed",
    "width",
    "depth",
    "activation",
    "init_multiplier",
    "optimizer",
    "learning_rate",
    "batch_size",
    "loss",
    "factor",
    "baseline_label",
    "variant_label",
    "both_fit",
    "retained",
    "skip_reason",
    "baseline_train_accuracy",
    "baseline_test_accuracy",
    "baseline_gap",
    "baseline_jacobian_norm",
    "baseline_transitions",
    "variant_train_accuracy",
    "variant_test_accuracy",
    "variant_gap",
    "variant_jacobian_norm",
    "variant_transitions",
];

fn side_labels(factor: PairedFactor) -> (&'static str, &'static str) {
    match factor {
        PairedFactor::Labels => ("true_labels", "random_labels"),
        PairedFactor::Augmentation => ("no_augmentation", "augmented"),
        PairedFactor::Activation => ("relu", "hard_sigmoid"),
        PairedFactor::Batch => ("minibatch", "full_batch"),
    }
}

/// Runs every (cell, seed) pair twice — baseline and variant of the declared
/// factor — under identical seeds and draws. Cells where the fit filter
/// fails are kept in the output, flagged `retained = false`, with the reason
/// logged and recorded.
pub fn run_paired_factor<F: Scalar>(spec: &ExperimentSpec) -> Result<Vec<PairedResult>> {
    require_kind(spec, StudyKind::PairedFactor)?;
    let factor = spec.factor.expect("validated: paired_factor has a factor");
    let (train_ds, test_ds) = spec.resolve_datasets::<F>()?;
    let cells = spec.expand_grid()?;
    if factor == PairedFactor::Batch {
        for c in &cells {
            if c.batch_size == BatchSize::Full {
                return Err(Error::Config(
                    "the batch factor compares minibatch vs. full batch; \
                     the grid's batch_sizes must be minibatch counts"
                        .into(),
                ));
            }
        }
    }

    let jobs: Vec<(CellConfig, u64)> = cells
        .iter()
        .flat_map(|c| spec.seeds.iter().map(move |&s| (c.clone(), s)))
        .collect();

    let results = jobs
        .into_par_iter()
        .map(|(cell, seed)| paired_cell::<F>(spec, factor, &cell, seed, &train_ds, &test_ds))
        .collect::<Result<Vec<PairedResult>>>()?;

    if let Some(path) = &spec.output {
        let flat: Vec<Vec<String>> = results.iter().map(paired_fields).collect();
        write_rows(path, &PAIRED_HEADER, &flat)?;
    }
    Ok(results)
}

fn paired_cell<F: Scalar>(
    spec: &ExperimentSpec,
    factor: PairedFactor,
    cell: &CellConfig,
    seed: u64,
    train_ds: &Dataset<F>,
    test_ds: &Dataset<F>,
) -> Result<PairedResult> {
    let (base_label, var_label) = side_labels(factor);

    // The variant's training set: random labels over the identical inputs.
    let variant_ds_owned;
    let variant_ds: &Dataset<F> = match factor {
        PairedFactor::Labels => {
            variant_ds_owned =
                randomize_labels(train_ds, seeds::derive(seed, "random-labels", cell.index as u64));
            &variant_ds_owned
        }
        _ => train_ds,
    };

    let (w, h) = match factor {
        PairedFactor::Augmentation => spec.dataset.image_dims(train_ds.dim())?,
        _ => (0, 0),
    };
    let augment_cfg = match factor {
        PairedFactor::Augmentation => Some(spec.augment.to_config(w, h)),
        _ => None,
    };

    let run_side = |label: &'static str,
                    activation: Activation,
                    batch: BatchSize,
                    ds: &Dataset<F>,
                    augment: Option<&crate::data::AugmentConfig>|
     -> Result<Option<PairedSide>> {
        let mut side_cell = cell.clone();
        side_cell.activation = activation;
        side_cell.batch_size = batch;
        let widths = side_cell.layer_widths(ds.dim(), ds.n_classes());
        let net = Mlp::<F>::init(
            &widths,
            activation,
            side_cell.init_multiplier,
            init_seed(seed, cell.index),
        )?;
        let cfg = spec.optimizer_config(&side_cell, ds.len());
        match train_network(
            net,
            ds,
            test_ds,
            &cfg,
            spec.optimizer.loss,
            augment,
            training_seed(seed, cell.index),
        ) {
            Ok(outcome) => Ok(Some(PairedSide {
                label,
                train_accuracy: outcome.train_accuracy,
                test_accuracy: outcome.test_accuracy,
                generalization_gap: outcome.generalization_gap,
                mean_jacobian_norm: measured_jacobian_norm(&outcome.network, test_ds, spec)?,
                mean_transitions: measured_transitions(&outcome.network, test_ds, spec)?,
                fit_train_exactly: outcome.fit_train_exactly,
            })),
            Err(Error::Diverged { step, reason }) => {
                log::warn!(
                    "paired cell {} seed {seed} side {label} diverged at step {step}: {reason}",
                    cell.index
                );
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };

    let (base_act, var_act) = match factor {
        PairedFactor::Activation => (Activation::Relu, Activation::HardSigmoid),
        _ => (cell.activation, cell.activation),
    };
    let var_batch = match factor {
        PairedFactor::Batch => BatchSize::Full,
        _ => cell.batch_size,
    };

    let baseline = run_side(base_label, base_act, cell.batch_size, train_ds, None)?;
    let variant = run_side(var_label, var_act, var_batch, variant_ds, augment_cfg.as_ref())?;

    let both_fit = matches!(
        (&baseline, &variant),
        (Some(b), Some(v)) if b.fit_train_exactly && v.fit_train_exactly
    );
    let retained = match factor {
        PairedFactor::Augmentation => baseline.is_some() && variant.is_some(),
        _ => both_fit,
    };
    let skip_reason = if retained {
        String::new()
    } else {
        let mut reasons = Vec::new();
        match &baseline {
            None => reasons.push("baseline diverged".to_string()),
            Some(b) if !b.fit_train_exactly && factor != PairedFactor::Augmentation => {
                reasons.push(format!("baseline train accuracy {} < 1", b.train_accuracy));
            }
            _ => {}
        }
        match &variant {
            None => reasons.push("variant diverged".to_string()),
            Some(v) if !v.fit_train_exactly && factor != PairedFactor::Augmentation => {
                reasons.push(format!("variant train accuracy {} < 1", v.train_accuracy));
            }
            _ => {}
        }
        let reason = reasons.join("; ");
        log::warn!("paired cell {} seed {seed} skipped: {reason}", cell.index);
        reason
    };

    Ok(PairedResult {
        cell_index: cell.index,
        seed,
        cell: cell.clone(),
        loss: spec.optimizer.loss,
        factor,
        baseline,
        variant,
        both_fit,
        retained,
        skip_reason,
    })
}

fn paired_fields(r: &PairedResult) -> Vec<String> {
    let (base_label, var_label) = side_labels(r.factor);
    let side = |s: &Option<PairedSide>| -> [String; 5] {
        match s {
            Some(s) => [
                fmt_f64(s.train_accuracy),
                fmt_f64(s.test_accuracy),
                fmt_f64(s.generalization_gap),
                fmt_f64(s.mean_jacobian_norm),
                fmt_f64(s.mean_transitions),
            ],
            None => Default::default(),
        }
    };
    let mut fields = vec![r.cell_index.to_string(), r.seed.to_string()];
    fields.extend(cell_fields(&r.cell, r.loss));
    fields.extend([
        r.factor.to_string(),
        base_label.to_string(),
        var_label.to_string(),
        r.both_fit.to_string(),
        r.retained.to_string(),
        r.skip_reason.clone(),
    ]);
    fields.extend(side(&r.baseline));
    fields.extend(side(&r.variant));
    fields
}

// ---------------------------------------------------------------------------
// Trajectory study
// ---------------------------------------------------------------------------

/// One aggregated profile bucket of a trajectory study.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStudyRow {
    pub trajectory_kind: TrajectoryKind,
    /// Bucket position along the loop, `0 .. k/window`.
    pub window_index: usize,
    /// First sample index of the bucket (`window_index × window`).
    pub window_start: usize,
    /// Jacobian norm averaged over the bucket's samples and all seeds.
    pub mean_jacobian_norm: f64,
    /// Transition count of the bucket's arcs averaged over seeds.
    pub mean_transitions: f64,
    pub seeds_used: usize,
}

/// Header of the trajectory-study CSV, in column order.
pub const TRAJECTORY_HEADER: [&str; 6] = [
    "trajectory_kind",
    "window_index",
    "window_start",
    "mean_jacobian_norm",
    "mean_transitions",
    "seeds_used",
];

/// Draws the three anchor examples for a fitted ellipse. Cross-class picks
/// one example from each of three distinct classes; same-class picks three
/// distinct examples of one class. Deterministic in `seed`.
fn draw_anchors<F: Scalar>(
    train: &Dataset<F>,
    kind: TrajectoryKind,
    seed: u64,
) -> Result<[usize; 3]> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); train.n_classes()];
    for (i, &y) in train.labels().iter().enumerate() {
        by_class[y].push(i);
    }
    match kind {
        TrajectoryKind::RandomEllipse => Err(Error::Parameter(
            "random ellipses have no data anchors".into(),
        )),
        TrajectoryKind::DataEllipseCrossClass => {
            let populated: Vec<usize> =
                (0..by_class.len()).filter(|&c| !by_class[c].is_empty()).collect();
            if populated.len() < 3 {
                return Err(Error::DegenerateInput(format!(
                    "cross-class anchors need 3 populated classes, found {}",
                    populated.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "anchors", 0));
            let picks = sample(&mut rng, populated.len(), 3);
            let mut anchors = [0usize; 3];
            for (slot, p) in picks.iter().enumerate() {
                let class = &by_class[populated[p]];
                anchors[slot] = class[rng.gen_range(0..class.len())];
            }
            Ok(anchors)
        }
        TrajectoryKind::DataEllipseSameClass => {
            let eligible: Vec<usize> =
                (0..by_class.len()).filter(|&c| by_class[c].len() >= 3).collect();
            if eligible.is_empty() {
                return Err(Error::DegenerateInput(
                    "same-class anchors need a class with at least 3 examples".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "anchors", 1));
            let class = &by_class[eligible[rng.gen_range(0..eligible.len())]];
            let picks = sample(&mut rng, class.len(), 3);
            let mut anchors = [0usize; 3];
            for (slot, p) in picks.iter().enumerate() {
                anchors[slot] = class[p];
            }
            Ok(anchors)
        }
    }
}

/// Builds the trajectory of one kind for one seed.
fn study_trajectory<F: Scalar>(
    spec: &ExperimentSpec,
    train: &Dataset<F>,
    kind: TrajectoryKind,
    seed: u64,
) -> Result<Trajectory<F>> {
    let k = spec.trajectory.k;
    match kind {
        TrajectoryKind::RandomEllipse => {
            random_ellipse(train.dim(), k, seeds::derive(seed, "ellipse", 0))
        }
        TrajectoryKind::DataEllipseCrossClass | TrajectoryKind::DataEllipseSameClass => {
            let [a, b, c] = draw_anchors(train, kind, seed)?;
            data_fitted_ellipse(train.input(a), train.input(b), train.input(c), k, seed)
        }
    }
}

/// Trains one network per seed (single-cell grid) and averages sensitivity
/// profiles along each configured trajectory kind over the seeds. Rows come
/// out grouped by kind in config order, then by window index.
pub fn run_trajectory_study<F: Scalar>(spec: &ExperimentSpec) -> Result<Vec<TrajectoryStudyRow>> {
    require_kind(spec, StudyKind::TrajectoryStudy)?;
    let cell = spec.single_cell()?;
    let (train_ds, test_ds) = spec.resolve_datasets::<F>()?;
    let window = spec.trajectory.window;
    let buckets = spec.trajectory.k / window;

    // Per seed: train, then profile every kind. Parallel over seeds.
    let per_seed: Vec<Vec<(Vec<f64>, Vec<u64>)>> = spec
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<(Vec<f64>, Vec<u64>)>> {
            let widths = cell.layer_widths(train_ds.dim(), train_ds.n_classes());
            let net = Mlp::<F>::init(
                &widths,
                cell.activation,
                cell.init_multiplier,
                init_seed(seed, cell.index),
            )?;
            let cfg = spec.optimizer_config(&cell, train_ds.len());
            let outcome = train_network(
                net,
                &train_ds,
                &test_ds,
                &cfg,
                spec.optimizer.loss,
                None,
                training_seed(seed, cell.index),
            )?;
            let mut kinds = Vec::with_capacity(spec.trajectory.kinds.len());
            for &kind in &spec.trajectory.kinds {
                let t = study_trajectory(spec, &train_ds, kind, seed)?;
                let profile = sensitivity_profile(&outcome.network, &t, window)?;
                let norms: Vec<f64> =
                    profile.jacobian_norms.iter().map(|v| v.as_f64()).collect();
                kinds.push((norms, profile.window_transitions));
            }
            Ok(kinds)
        })
        .collect::<Result<Vec<_>>>()?;

    let seeds_used = spec.seeds.len();
    let mut rows = Vec::with_capacity(spec.trajectory.kinds.len() * buckets);
    for (ki, &kind) in spec.trajectory.kinds.iter().enumerate() {
        for b in 0..buckets {
            let mut norm_sum = 0.0;
            let mut transition_sum = 0.0;
            for seed_result in &per_seed {
                let (norms, transitions) = &seed_result[ki];
                let bucket = &norms[b * window..(b + 1) * window];
                norm_sum += bucket.iter().sum::<f64>() / window as f64;
                transition_sum += transitions[b] as f64;
            }
            rows.push(TrajectoryStudyRow {
                trajectory_kind: kind,
                window_index: b,
                window_start: b * window,
                mean_jacobian_norm: norm_sum / seeds_used as f64,
                mean_transitions: transition_sum / seeds_used as f64,
                seeds_used,
            });
        }
    }

    if let Some(path) = &spec.output {
        let flat: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.trajectory_kind.to_string(),
                    r.window_index.to_string(),
                    r.window_start.to_string(),
                    fmt_f64(r.mean_jacobian_norm),
                    fmt_f64(r.mean_transitions),
                    r.seeds_used.to_string(),
                ]
            })
            .collect();
        write_rows(path, &TRAJECTORY_HEADER, &flat)?;
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Boundary study
// ---------------------------------------------------------------------------

/// Region maps of the same input plane before and after training.
#[derive(Debug, Clone)]
pub struct BoundaryStudyResult {
    pub resolution: usize,
    /// Training-set indices of the three plane anchors.
    pub anchor_indices: [usize; 3],
    pub before: BoundaryMap,
    pub after: BoundaryMap,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Derives the four grid-file paths from the configured output path: the
/// extension is dropped and `_{before,after}_{labels,mask}.csv` appended.
pub fn boundary_file_paths(output: &Path) -> [PathBuf; 4] {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "boundary".into());
    let parent = output.parent().unwrap_or_else(|| Path::new(""));
    let make = |suffix: &str| parent.join(format!("{stem}_{suffix}.csv"));
    [
        make("before_labels"),
        make("before_mask"),
        make("after_labels"),
        make("after_mask"),
    ]
}

/// Maps linear regions over a plane through three training points, once with
/// the freshly initialized network and once after training — on the exact
/// same grid — and writes four headerless `resolution × resolution` CSV
/// grids (labels and mask, before and after).
pub fn run_boundary_study<F: Scalar>(spec: &ExperimentSpec) -> Result<BoundaryStudyResult> {
    require_kind(spec, StudyKind::BoundaryStudy)?;
    let cell = spec.single_cell()?;
    let (train_ds, test_ds) = spec.resolve_datasets::<F>()?;
    let seed = spec.seeds[0];

    if train_ds.len() < 3 {
        return Err(Error::DegenerateInput(
            "a boundary study needs at least 3 training points".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "anchors", 0));
    let picks = sample(&mut rng, train_ds.len(), 3);
    let anchor_indices = [picks.index(0), picks.index(1), picks.index(2)];
    let grid = plane_grid(
        train_ds.input(anchor_indices[0]),
        train_ds.input(anchor_indices[1]),
        train_ds.input(anchor_indices[2]),
        spec.boundary.resolution,
    )?;

    let widths = cell.layer_widths(train_ds.dim(), train_ds.n_classes());
    let net = Mlp::<F>::init(
        &widths,
        cell.activation,
        cell.init_multiplier,
        init_seed(seed, cell.index),
    )?;
    let selector = spec.boundary.layer.into();
    let before = boundary_map(&net, &grid, selector)?;

    let cfg = spec.optimizer_config(&cell, train_ds.len());
    let outcome = train_network(
        net,
        &train_ds,
        &test_ds,
        &cfg,
        spec.optimizer.loss,
        None,
        training_seed(seed, cell.index),
    )?;
    let after = boundary_map(&outcome.network, &grid, selector)?;

    let result = BoundaryStudyResult {
        resolution: spec.boundary.resolution,
        anchor_indices,
        before,
        after,
        train_accuracy: outcome.train_accuracy,
        test_accuracy: outcome.test_accuracy,
    };

    if let Some(path) = &spec.output {
        let [bl, bm, al, am] = boundary_file_paths(path);
        write_label_grid(&bl, &result.before)?;
        write_mask_grid(&bm, &result.before)?;
        write_label_grid(&al, &result.after)?;
        write_mask_grid(&am, &result.after)?;
    }
    Ok(result)
}

fn write_label_grid(path: &Path, map: &BoundaryMap) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    let res = map.resolution;
    for gy in 0..res {
        let row: Vec<String> =
            (0..res).map(|gx| map.labels[gy * res + gx].to_string()).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_mask_grid(path: &Path, map: &BoundaryMap) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    let res = map.resolution;
    for gy in 0..res {
        let row: Vec<String> = (0..res)
            .map(|gx| if map.mask[gy * res + gx] { "1" } else { "0" }.to_string())
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Per-point study
// ---------------------------------------------------------------------------

/// A per-point bound report plus the test-set indices it was computed on.
#[derive(Debug, Clone)]
pub struct PerPointStudyResult {
    pub report: PerPointReport,
    /// Ascending indices into the canonical test set; the report's rows are
    /// aligned with this list, and `M` was estimated over exactly these
    /// points.
    pub subset_indices: Vec<usize>,
    pub train_accuracy: f64,
}

/// Header of the per-point CSV, in column order.
pub const PER_POINT_HEADER: [&str; 10] = [
    "point_id",
    "loss",
    "jy_actual",
    "full_actual",
    "jy_lower",
    "jy_upper",
    "full_lower",
    "full_approx",
    "M",
    "n",
];

/// Trains the single grid cell and tabulates per-point sensitivities against
/// the loss-level bounds over a test subset. The CSV records the subset in a
/// leading `#` comment line; `point_id` is the index into the canonical test
/// set.
pub fn run_per_point<F: Scalar>(spec: &ExperimentSpec) -> Result<PerPointStudyResult> {
    require_kind(spec, StudyKind::PerPoint)?;
    let cell = spec.single_cell()?;
    let (train_ds, test_ds) = spec.resolve_datasets::<F>()?;
    let seed = spec.seeds[0];

    let widths = cell.layer_widths(train_ds.dim(), train_ds.n_classes());
    let net = Mlp::<F>::init(
        &widths,
        cell.activation,
        cell.init_multiplier,
        init_seed(seed, cell.index),
    )?;
    let cfg = spec.optimizer_config(&cell, train_ds.len());
    let outcome = train_network(
        net,
        &train_ds,
        &test_ds,
        &cfg,
        spec.optimizer.loss,
        None,
        training_seed(seed, cell.index),
    )?;

    let subset = spec.per_point.subset;
    let subset_indices: Vec<usize> = if subset == 0 || subset >= test_ds.len() {
        (0..test_ds.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "per-point-subset", 0));
        let mut picks = sample(&mut rng, test_ds.len(), subset).into_vec();
        picks.sort_unstable();
        picks
    };
    let eval_ds = test_ds.select(&subset_indices)?;
    let report = per_point_report(&outcome.network, &eval_ds, spec.optimizer.loss)?;

    let result = PerPointStudyResult {
        report,
        subset_indices,
        train_accuracy: outcome.train_accuracy,
    };

    if let Some(path) = &spec.output {
        write_per_point_csv(path, &result, seed)?;
    }
    Ok(result)
}

fn write_per_point_csv(path: &Path, result: &PerPointStudyResult, seed: u64) -> Result<()> {
    let mut file = File::create(path)?;
    let indices: Vec<String> =
        result.subset_indices.iter().map(|i| i.to_string()).collect();
    writeln!(
        file,
        "# M = {} estimated over {} test points (study seed {seed}); test-set indices: {}",
        fmt_f64(result.report.context.m_constant),
        result.subset_indices.len(),
        indices.join(" ")
    )?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(PER_POINT_HEADER)?;
    for row in &result.report.rows {
        w.write_record(&[
            result.subset_indices[row.point_id].to_string(),
            fmt_f64(row.loss),
            fmt_f64(row.jy_actual),
            fmt_f64(row.full_actual),
            fmt_f64(row.jy_lower),
            fmt_f64(row.jy_upper),
            fmt_f64(row.full_lower),
            fmt_f64(row.full_approx),
            fmt_f64(result.report.context.m_constant),
            result.report.context.n_classes.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{
        BatchSizeSpec, DataSource, DatasetSpec, SyntheticSpec, TrajectorySettings,
    };

    /// A small synthetic-blob spec all study tests start from.
    fn base_spec(kind: StudyKind) -> ExperimentSpec {
        let mut spec: ExperimentSpec = toml::from_str(
            r#"
kind = "sweep"
seeds = [0, 1]

[dataset]
source = "synthetic"
"#,
        )
        .unwrap();
        spec.kind = kind;
        spec.dataset = DatasetSpec {
            source: DataSource::Synthetic,
            synthetic: Some(SyntheticSpec {
                classes: 3,
                dim: 9,
                train_per_class: 20,
                test_per_class: 10,
                separation: 8.0,
                seed: 7,
            }),
            ..DatasetSpec::default()
        };
        spec.network.widths = vec![12];
        spec.network.depths = vec![2];
        spec.optimizer.learning_rates = vec![5e-3];
        spec.optimizer.batch_sizes = vec![BatchSizeSpec::Count(16)];
        spec.optimizer.total_steps = 250;
        spec.trajectory = TrajectorySettings {
            k: 60,
            window: 10,
            ..TrajectorySettings::default()
        };
        spec.measure.jacobian_points = 20;
        spec.measure.translation_images = 2;
        spec
    }

    fn tmp_out(dir: &tempfile::TempDir, name: &str) -> PathBuf {
        dir.path().join(name)
    }

    #[test]
    fn sweep_covers_grid_and_reruns_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = base_spec(StudyKind::Sweep);
        spec.network.widths = vec![8, 12];
        spec.output = Some(tmp_out(&dir, "sweep_a.csv"));
        let rows = run_sweep::<f64>(&spec).unwrap();
        assert_eq!(rows.len(), 2 * 2);
        let order: Vec<(usize, u64)> =
            rows.iter().map(|r| (r.config_index, r.seed)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        for r in &rows {
            assert!(!r.diverged);
            assert!(r.mean_jacobian_norm.unwrap() > 0.0);
            assert!(r.train_accuracy.unwrap() > 0.5);
        }

        spec.output = Some(tmp_out(&dir, "sweep_b.csv"));
        run_sweep::<f64>(&spec).unwrap();
        let a = std::fs::read(tmp_out(&dir, "sweep_a.csv")).unwrap();
        let b = std::fs::read(tmp_out(&dir, "sweep_b.csv")).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);

        let text = String::from_utf8(a).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, SWEEP_HEADER.join(","));
        assert_eq!(text.lines().count(), 1 + rows.len());
    }

    #[test]
    fn sweep_flags_divergence_and_keeps_the_row() {
        let mut spec = base_spec(StudyKind::Sweep);
        spec.optimizer.loss = LossKind::L2;
        spec.optimizer.kinds = vec![crate::train::OptimizerKind::Sgd];
        spec.optimizer.learning_rates = vec![1e12];
        spec.optimizer.total_steps = 20;
        spec.seeds = vec![0];
        let rows = run_sweep::<f64>(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].diverged);
        assert!(rows[0].divergence_step.is_some());
        assert!(rows[0].train_accuracy.is_none());
        assert!(rows[0].mean_jacobian_norm.is_none());
    }

    #[test]
    fn sweep_rejects_mismatched_kind() {
        let spec = base_spec(StudyKind::PerPoint);
        assert!(matches!(run_sweep::<f64>(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn paired_labels_fit_filter_and_sides() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = base_spec(StudyKind::PairedFactor);
        spec.factor = Some(PairedFactor::Labels);
        spec.seeds = vec![0];
        spec.network.widths = vec![48];
        spec.optimizer.total_steps = 2500;
        spec.dataset.synthetic.as_mut().unwrap().train_per_class = 10;
        spec.output = Some(tmp_out(&dir, "paired.csv"));
        let results = run_paired_factor::<f64>(&spec).unwrap();
        assert_eq!(results.len(), 1);
        let r = &results[0];
        let base = r.baseline.as_ref().unwrap();
        let var = r.variant.as_ref().unwrap();
        assert_eq!(base.label, "true_labels");
        assert_eq!(var.label, "random_labels");
        assert_eq!(r.retained, r.both_fit);
        if r.retained {
            assert!(r.skip_reason.is_empty());
        } else {
            assert!(!r.skip_reason.is_empty());
        }
        // Blobs are linearly separable; the baseline must fit.
        assert!(base.fit_train_exactly, "baseline accuracy {}", base.train_accuracy);

        let text = std::fs::read_to_string(tmp_out(&dir, "paired.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), PAIRED_HEADER.join(","));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn paired_activation_and_batch_sides_are_forced() {
        let mut spec = base_spec(StudyKind::PairedFactor);
        spec.factor = Some(PairedFactor::Activation);
        spec.seeds = vec![3];
        spec.optimizer.total_steps = 40;
        let results = run_paired_factor::<f64>(&spec).unwrap();
        let r = &results[0];
        assert_eq!(r.baseline.as_ref().unwrap().label, "relu");
        assert_eq!(r.variant.as_ref().unwrap().label, "hard_sigmoid");
        assert!(r.baseline.as_ref().unwrap().mean_jacobian_norm > 0.0);

        spec.factor = Some(PairedFactor::Batch);
        let results = run_paired_factor::<f64>(&spec).unwrap();
        let r = &results[0];
        assert_eq!(r.baseline.as_ref().unwrap().label, "minibatch");
        assert_eq!(r.variant.as_ref().unwrap().label, "full_batch");

        // A full-batch grid cannot express the batch contrast.
        spec.optimizer.batch_sizes = vec![BatchSizeSpec::Word("full".into())];
        assert!(matches!(
            run_paired_factor::<f64>(&spec),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn trajectory_study_rows_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = base_spec(StudyKind::TrajectoryStudy);
        spec.optimizer.total_steps = 60;
        spec.output = Some(tmp_out(&dir, "traj_a.csv"));
        let rows = run_trajectory_study::<f64>(&spec).unwrap();
        // 3 kinds × (60 / 10) buckets.
        assert_eq!(rows.len(), 3 * 6);
        for r in &rows {
            assert_eq!(r.seeds_used, 2);
            assert!(r.mean_jacobian_norm > 0.0);
            assert!(r.mean_transitions >= 0.0);
        }
        assert_eq!(rows[0].window_index, 0);
        assert_eq!(rows[5].window_start, 50);

        spec.output = Some(tmp_out(&dir, "traj_b.csv"));
        let again = run_trajectory_study::<f64>(&spec).unwrap();
        assert_eq!(rows, again);
        let a = std::fs::read(tmp_out(&dir, "traj_a.csv")).unwrap();
        let b = std::fs::read(tmp_out(&dir, "traj_b.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trajectory_study_errors_when_anchors_are_unavailable() {
        // Two classes cannot supply cross-class anchors.
        let mut spec = base_spec(StudyKind::TrajectoryStudy);
        spec.dataset.synthetic.as_mut().unwrap().classes = 2;
        spec.optimizer.total_steps = 10;
        spec.trajectory.kinds = vec![TrajectoryKind::DataEllipseCrossClass];
        assert!(matches!(
            run_trajectory_study::<f64>(&spec),
            Err(Error::DegenerateInput(_))
        ));

        // Two examples per class cannot supply same-class anchors.
        let mut spec = base_spec(StudyKind::TrajectoryStudy);
        spec.dataset.synthetic.as_mut().unwrap().train_per_class = 2;
        spec.optimizer.total_steps = 10;
        spec.trajectory.kinds = vec![TrajectoryKind::DataEllipseSameClass];
        assert!(matches!(
            run_trajectory_study::<f64>(&spec),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn boundary_study_writes_full_grids() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = base_spec(StudyKind::BoundaryStudy);
        spec.seeds = vec![5];
        spec.network.widths = vec![16];
        spec.boundary.resolution = 12;
        spec.optimizer.total_steps = 120;
        spec.output = Some(tmp_out(&dir, "plane.csv"));
        let result = run_boundary_study::<f64>(&spec).unwrap();
        assert_eq!(result.before.resolution, 12);
        assert_eq!(result.after.resolution, 12);
        // A 16-wide random net always has boundaries crossing the plane.
        assert!(result.before.mask.iter().any(|&b| b));
        let mut sorted = result.anchor_indices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 3);

        for path in boundary_file_paths(spec.output.as_ref().unwrap()) {
            let text = std::fs::read_to_string(&path).unwrap();
            let lines: Vec<&str> = text.lines().collect();
            assert_eq!(lines.len(), 12, "{}", path.display());
            for line in lines {
                assert_eq!(line.split(',').count(), 12);
            }
        }

        // Before/after use the identical grid: rerunning before training
        // alone reproduces the same map.
        let again = run_boundary_study::<f64>(&spec).unwrap();
        assert_eq!(result.before.labels, again.before.labels);
        assert_eq!(result.after.labels, again.after.labels);
    }

    #[test]
    fn per_point_csv_has_the_documented_columns() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = base_spec(StudyKind::PerPoint);
        spec.seeds = vec![2];
        spec.per_point.subset = 12;
        spec.optimizer.total_steps = 120;
        spec.output = Some(tmp_out(&dir, "points.csv"));
        let result = run_per_point::<f64>(&spec).unwrap();
        assert_eq!(result.report.rows.len(), 12);
        assert_eq!(result.subset_indices.len(), 12);
        assert!(result.subset_indices.windows(2).all(|w| w[0] < w[1]));
        assert!(*result.subset_indices.last().unwrap() < 30);

        let text = std::fs::read_to_string(tmp_out(&dir, "points.csv")).unwrap();
        let mut lines = text.lines();
        let comment = lines.next().unwrap();
        assert!(comment.starts_with("# M = "));
        assert!(comment.contains("12 test points"));
        assert_eq!(lines.next().unwrap(), PER_POINT_HEADER.join(","));
        assert_eq!(lines.count(), 12);

        // Subset of at least the test size → the whole test set, in order.
        spec.per_point.subset = 0;
        spec.output = None;
        let full = run_per_point::<f64>(&spec).unwrap();
        assert_eq!(full.subset_indices, (0..30).collect::<Vec<_>>());
    }
}
