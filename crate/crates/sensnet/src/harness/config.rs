//! Experiment configuration: a TOML schema mirroring the study parameters,
//! strict parsing (unknown keys are rejected by name), grid expansion, and
//! dataset resolution.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::data::{load_idx, synthetic_blobs, AugmentConfig, Dataset};
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::scalar::Scalar;
use crate::sensitivity::LayerSelector;
use crate::train::{BatchSize, LossKind, OptimizerConfig, OptimizerKind};

/// Which study a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    TrajectoryStudy,
    BoundaryStudy,
    PairedFactor,
    Sweep,
    PerPoint,
}

impl std::fmt::Display for StudyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StudyKind::TrajectoryStudy => "trajectory_study",
            StudyKind::BoundaryStudy => "boundary_study",
            StudyKind::PairedFactor => "paired_factor",
            StudyKind::Sweep => "sweep",
            StudyKind::PerPoint => "per_point",
        })
    }
}

/// Scalar width the study computes in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

/// The binary factor of a paired study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairedFactor {
    /// True labels vs. uniformly random labels.
    Labels,
    /// No augmentation vs. translation/flip augmentation.
    Augmentation,
    /// ReLU vs. HardSigmoid activation.
    Activation,
    /// Minibatch vs. full-batch gradients.
    Batch,
}

impl std::fmt::Display for PairedFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PairedFactor::Labels => "labels",
            PairedFactor::Augmentation => "augmentation",
            PairedFactor::Activation => "activation",
            PairedFactor::Batch => "batch",
        })
    }
}

/// Closed-trajectory generators selectable in a trajectory study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    /// Origin-centered random ellipse.
    RandomEllipse,
    /// Ellipse through three training points of three different classes.
    DataEllipseCrossClass,
    /// Ellipse through three training points of one class.
    DataEllipseSameClass,
}

impl std::fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrajectoryKind::RandomEllipse => "random_ellipse",
            TrajectoryKind::DataEllipseCrossClass => "data_ellipse_cross_class",
            TrajectoryKind::DataEllipseSameClass => "data_ellipse_same_class",
        })
    }
}

/// Where the datasets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    #[default]
    Idx,
    Synthetic,
}

/// Synthetic-blob generation parameters.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub separation: f64,
    /// Data-generation seed, independent of the study seed list so every
    /// seed sees the same data.
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            dim: 16,
            train_per_class: 100,
            test_per_class: 50,
            separation: 6.0,
            seed: 0xDA7A,
        }
    }
}

/// Dataset section: IDX file paths or synthetic blobs, optional subsetting,
/// and the image geometry used by translations and augmentation.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub source: DataSource,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// Keep only the first `train_size` training examples (0 = all).
    pub train_size: usize,
    /// Keep only the first `test_size` test examples (0 = all).
    pub test_size: usize,
    pub image_width: Option<usize>,
    pub image_height: Option<usize>,
    pub synthetic: Option<SyntheticSpec>,
}

impl DatasetSpec {
    fn validate(&self) -> Result<()> {
        match self.source {
            DataSource::Idx => {
                for (name, path) in [
                    ("train_images", &self.train_images),
                    ("train_labels", &self.train_labels),
                    ("test_images", &self.test_images),
                    ("test_labels", &self.test_labels),
                ] {
                    if path.is_none() {
                        return Err(Error::Config(format!(
                            "dataset.{name} is required when dataset.source = \"idx\""
                        )));
                    }
                }
            }
            DataSource::Synthetic => {}
        }
        Ok(())
    }

    /// Image geometry: the explicit fields, or a square inferred from `d`.
    pub fn image_dims(&self, d: usize) -> Result<(usize, usize)> {
        match (self.image_width, self.image_height) {
            (Some(w), Some(h)) => {
                if w * h != d {
                    return Err(Error::Config(format!(
                        "dataset.image_width × image_height = {w}×{h} ≠ input dimension {d}"
                    )));
                }
                Ok((w, h))
            }
            (None, None) => {
                let side = (d as f64).sqrt().round() as usize;
                if side * side == d {
                    Ok((side, side))
                } else {
                    Err(Error::Config(format!(
                        "input dimension {d} is not square; set dataset.image_width and image_height"
                    )))
                }
            }
            _ => Err(Error::Config(
                "set both dataset.image_width and dataset.image_height or neither".into(),
            )),
        }
    }
}

/// Architecture grid; the Cartesian product of all lists is swept.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkGrid {
    pub widths: Vec<usize>,
    /// Affine layer counts; a depth-`L` network has `L−1` hidden layers.
    pub depths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub init_multipliers: Vec<f64>,
}

impl Default for NetworkGrid {
    fn default() -> Self {
        Self {
            widths: vec![100],
            depths: vec![2],
            activations: vec![Activation::Relu],
            init_multipliers: vec![1.0],
        }
    }
}

/// A batch size in config form: a positive integer or the string `"full"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BatchSizeSpec {
    Count(u64),
    Word(String),
}

impl BatchSizeSpec {
    pub fn to_batch_size(&self) -> Result<BatchSize> {
        match self {
            BatchSizeSpec::Count(0) => {
                Err(Error::Config("batch size must be positive or \"full\"".into()))
            }
            BatchSizeSpec::Count(n) => Ok(BatchSize::Minibatch(*n as usize)),
            BatchSizeSpec::Word(w) if w == "full" => Ok(BatchSize::Full),
            BatchSizeSpec::Word(w) => Err(Error::Config(format!(
                "batch size {w:?} is neither a positive integer nor \"full\""
            ))),
        }
    }
}

/// Optimizer grid plus the shared (non-swept) training settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerGrid {
    pub kinds: Vec<OptimizerKind>,
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<BatchSizeSpec>,
    pub total_steps: usize,
    pub decay_factor: f64,
    /// 0 selects the default schedule of one decay per 500 epochs
    /// (`500 × ⌈N/batch⌉` steps).
    pub decay_interval_steps: usize,
    pub loss: LossKind,
}

impl Default for OptimizerGrid {
    fn default() -> Self {
        Self {
            kinds: vec![OptimizerKind::Adam],
            learning_rates: vec![1e-3],
            batch_sizes: vec![BatchSizeSpec::Count(32)],
            total_steps: 3000,
            decay_factor: 0.1,
            decay_interval_steps: 0,
            loss: LossKind::CrossEntropy,
        }
    }
}

/// Trajectory sampling settings shared by the studies.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySettings {
    /// Samples per closed loop. The default is divisible by 6 (so fitted
    /// ellipses place their anchors on samples) and by the default window.
    pub k: usize,
    /// Arc width for profile bucketing; must divide `k`.
    pub window: usize,
    /// Which generators a trajectory study runs.
    pub kinds: Vec<TrajectoryKind>,
}

impl Default for TrajectorySettings {
    fn default() -> Self {
        Self {
            k: 1536,
            window: 64,
            kinds: vec![
                TrajectoryKind::RandomEllipse,
                TrajectoryKind::DataEllipseCrossClass,
                TrajectoryKind::DataEllipseSameClass,
            ],
        }
    }
}

/// Measurement sizes for sweeps and paired studies.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSettings {
    /// Jacobian norms are averaged over the first `jacobian_points` test
    /// examples — a fixed, seed-independent subset so rows are comparable.
    pub jacobian_points: usize,
    /// Transitions are averaged over translation trajectories of the first
    /// `translation_images` test examples.
    pub translation_images: usize,
}

impl Default for MeasureSettings {
    fn default() -> Self {
        Self { jacobian_points: 200, translation_images: 5 }
    }
}

/// Augmentation settings (image geometry comes from the dataset section).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSettings {
    pub max_translate_px: usize,
    pub wrap: bool,
    pub hflip_prob: f64,
}

impl Default for AugmentSettings {
    fn default() -> Self {
        Self { max_translate_px: 2, wrap: true, hflip_prob: 0.0 }
    }
}

impl AugmentSettings {
    /// Binds the settings to a concrete image geometry.
    pub fn to_config(&self, width: usize, height: usize) -> AugmentConfig {
        AugmentConfig {
            max_translate_px: self.max_translate_px,
            wrap: self.wrap,
            hflip_prob: self.hflip_prob,
            image_width: width,
            image_height: height,
        }
    }
}

/// Mirror of [`LayerSelector`] with a config spelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryLayer {
    #[default]
    LastHidden,
    All,
}

impl From<BoundaryLayer> for LayerSelector {
    fn from(b: BoundaryLayer) -> Self {
        match b {
            BoundaryLayer::LastHidden => LayerSelector::LastHidden,
            BoundaryLayer::All => LayerSelector::All,
        }
    }
}

/// Boundary-study settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundarySettings {
    pub resolution: usize,
    pub layer: BoundaryLayer,
}

impl Default for BoundarySettings {
    fn default() -> Self {
        Self { resolution: 48, layer: BoundaryLayer::LastHidden }
    }
}

/// Per-point-study settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerPointSettings {
    /// Evaluation subset size; 0 or anything ≥ the test-set size means the
    /// whole test set. Smaller subsets are drawn without replacement from a
    /// stream derived from the study seed.
    pub subset: usize,
}

impl Default for PerPointSettings {
    fn default() -> Self {
        Self { subset: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorSection {
    name: PairedFactor,
}

/// A fully validated experiment description.
///
/// Field-for-field this mirrors the TOML schema; [`parse_config`] builds one
/// from a file, and tests may construct it directly.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: StudyKind,
    #[serde(default)]
    pub precision: Precision,
    /// Output CSV path (or path stem for the boundary study's grid files);
    /// studies compute without writing when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub network: NetworkGrid,
    #[serde(default)]
    pub optimizer: OptimizerGrid,
    pub seeds: Vec<u64>,
    #[serde(default, deserialize_with = "factor_from_section")]
    pub factor: Option<PairedFactor>,
    #[serde(default)]
    pub trajectory: TrajectorySettings,
    #[serde(default)]
    pub measure: MeasureSettings,
    #[serde(default)]
    pub augment: AugmentSettings,
    #[serde(default)]
    pub boundary: BoundarySettings,
    #[serde(default)]
    pub per_point: PerPointSettings,
}

fn factor_from_section<'de, D>(de: D) -> std::result::Result<Option<PairedFactor>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let section: Option<FactorSection> = Option::deserialize(de)?;
    Ok(section.map(|s| s.name))
}

/// One point of the expanded hyper-parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellConfig {
    /// Position in grid-expansion order.
    pub index: usize,
    pub width: usize,
    pub depth: usize,
    pub activation: Activation,
    pub init_multiplier: f64,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: BatchSize,
}

impl CellConfig {
    /// Layer widths for this cell on a dataset with inputs of dimension `d`
    /// and `n` classes: `depth − 1` hidden layers of `width` units.
    pub fn layer_widths(&self, d: usize, n: usize) -> Vec<usize> {
        let mut widths = Vec::with_capacity(self.depth + 1);
        widths.push(d);
        widths.extend(std::iter::repeat(self.width).take(self.depth - 1));
        widths.push(n);
        widths
    }

    /// Batch size column value: the count, or the word `full`.
    pub fn batch_label(&self) -> String {
        match self.batch_size {
            BatchSize::Minibatch(b) => b.to_string(),
            BatchSize::Full => "full".into(),
        }
    }
}

impl ExperimentSpec {
    /// Checks the cross-field invariants.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be a nonempty list".into()));
        }
        for (name, empty) in [
            ("network.widths", self.network.widths.is_empty()),
            ("network.depths", self.network.depths.is_empty()),
            ("network.activations", self.network.activations.is_empty()),
            ("network.init_multipliers", self.network.init_multipliers.is_empty()),
            ("optimizer.kinds", self.optimizer.kinds.is_empty()),
            ("optimizer.learning_rates", self.optimizer.learning_rates.is_empty()),
            ("optimizer.batch_sizes", self.optimizer.batch_sizes.is_empty()),
            ("trajectory.kinds", self.trajectory.kinds.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("{name} must be a nonempty list")));
            }
        }
        match (self.kind, self.factor) {
            (StudyKind::PairedFactor, None) => {
                return Err(Error::Config(
                    "a paired_factor study needs a [factor] section".into(),
                ));
            }
            (kind, Some(_)) if kind != StudyKind::PairedFactor => {
                return Err(Error::Config(format!(
                    "[factor] is only valid for paired_factor studies, not {kind}"
                )));
            }
            _ => {}
        }
        if self.network.widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("network.widths entries must be positive".into()));
        }
        if self.network.depths.iter().any(|&d| d == 0) {
            return Err(Error::Config("network.depths entries must be positive".into()));
        }
        if self.network.init_multipliers.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Config("network.init_multipliers must be positive".into()));
        }
        if self.optimizer.learning_rates.iter().any(|&lr| !(lr > 0.0)) {
            return Err(Error::Config("optimizer.learning_rates must be positive".into()));
        }
        for b in &self.optimizer.batch_sizes {
            b.to_batch_size()?;
        }
        if self.trajectory.k < 3 {
            return Err(Error::Config("trajectory.k must be at least 3".into()));
        }
        if self.trajectory.window == 0 || self.trajectory.k % self.trajectory.window != 0 {
            return Err(Error::Config(format!(
                "trajectory.window ({}) must divide trajectory.k ({})",
                self.trajectory.window, self.trajectory.k
            )));
        }
        if self.boundary.resolution < 2 {
            return Err(Error::Config("boundary.resolution must be at least 2".into()));
        }
        Ok(())
    }

    /// Expands the Cartesian product of all grid lists, in nested order:
    /// width, depth, activation, init multiplier, optimizer kind, learning
    /// rate, batch size.
    pub fn expand_grid(&self) -> Result<Vec<CellConfig>> {
        let mut cells = Vec::new();
        for &width in &self.network.widths {
            for &depth in &self.network.depths {
                for &activation in &self.network.activations {
                    for &init_multiplier in &self.network.init_multipliers {
                        for &optimizer in &self.optimizer.kinds {
                            for &learning_rate in &self.optimizer.learning_rates {
                                for batch in &self.optimizer.batch_sizes {
                                    cells.push(CellConfig {
                                        index: cells.len(),
                                        width,
                                        depth,
                                        activation,
                                        init_multiplier,
                                        optimizer,
                                        learning_rate,
                                        batch_size: batch.to_batch_size()?,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }

    /// The single grid cell of a study that trains one network; errors if
    /// the grid expands to more than one.
    pub fn single_cell(&self) -> Result<CellConfig> {
        let cells = self.expand_grid()?;
        if cells.len() != 1 {
            return Err(Error::Config(format!(
                "a {} study needs a single-cell grid, but the grid expands to {} cells",
                self.kind,
                cells.len()
            )));
        }
        Ok(cells.into_iter().next().expect("one cell"))
    }

    /// Concrete optimizer configuration for one cell on `n_train` examples.
    ///
    /// A zero `decay_interval_steps` selects the default schedule of one
    /// decay every 500 epochs.
    pub fn optimizer_config(&self, cell: &CellConfig, n_train: usize) -> OptimizerConfig {
        let mut cfg = match cell.optimizer {
            OptimizerKind::Sgd => OptimizerConfig::sgd(cell.learning_rate),
            OptimizerKind::Momentum => OptimizerConfig::momentum(cell.learning_rate),
            OptimizerKind::Adam => OptimizerConfig::adam(cell.learning_rate),
            OptimizerKind::RmsProp => OptimizerConfig::rmsprop(cell.learning_rate),
        };
        cfg.batch_size = cell.batch_size;
        cfg.total_steps = self.optimizer.total_steps;
        cfg.decay_factor = self.optimizer.decay_factor;
        cfg.decay_interval_steps = if self.optimizer.decay_interval_steps == 0 {
            let batch = cell.batch_size.resolve(n_train).max(1);
            500 * n_train.div_ceil(batch)
        } else {
            self.optimizer.decay_interval_steps
        };
        cfg
    }

    /// Loads (or generates), standardizes, and subsets the train/test pair.
    ///
    /// Dataset paths are checked here rather than in [`Self::validate`] so
    /// that commands which never touch data (e.g. generating a random
    /// ellipse) accept a config without them.
    pub fn resolve_datasets<F: Scalar>(&self) -> Result<(Dataset<F>, Dataset<F>)> {
        self.dataset.validate()?;
        let (train, test) = match self.dataset.source {
            DataSource::Idx => {
                let train = load_idx::<F>(
                    self.dataset.train_images.as_ref().expect("validated"),
                    self.dataset.train_labels.as_ref().expect("validated"),
                )?;
                let test = load_idx::<F>(
                    self.dataset.test_images.as_ref().expect("validated"),
                    self.dataset.test_labels.as_ref().expect("validated"),
                )?;
                (train, test)
            }
            DataSource::Synthetic => {
                let s = self.dataset.synthetic.clone().unwrap_or_default();
                let train = synthetic_blobs::<F>(
                    s.train_per_class,
                    s.dim,
                    s.classes,
                    s.separation,
                    s.seed,
                )?;
                let test = synthetic_blobs::<F>(
                    s.test_per_class,
                    s.dim,
                    s.classes,
                    s.separation,
                    s.seed.wrapping_add(1),
                )?;
                (train, test)
            }
        };
        let mut train = train.standardized()?;
        let mut test = test.standardized()?;
        if self.dataset.train_size > 0 && self.dataset.train_size < train.len() {
            train = train.take(self.dataset.train_size)?;
        }
        if self.dataset.test_size > 0 && self.dataset.test_size < test.len() {
            test = test.take(self.dataset.test_size)?;
        }
        Ok((train, test))
    }
}

/// Reads and validates a TOML experiment config. Unknown keys are rejected
/// with an error naming the key.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)?;
    let spec: ExperimentSpec =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}
