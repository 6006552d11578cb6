//! Experiment harness: strict TOML configs, hyper-parameter grid expansion,
//! and the five study runners (sweep, paired factor, trajectory, boundary,
//! per-point), each writing deterministically ordered CSV output.
//!
//! Determinism contract: a study's output is a pure function of its
//! [`ExperimentSpec`] — jobs fan out over a worker pool, every job draws
//! from its own `(seed, cell)`-derived generator stream, and results merge
//! back in grid order, so re-running a config reproduces the CSV bytes.

mod config;
mod studies;

pub use config::{
    parse_config, AugmentSettings, BatchSizeSpec, BoundaryLayer, BoundarySettings, CellConfig,
    DataSource, DatasetSpec, ExperimentSpec, MeasureSettings, NetworkGrid, OptimizerGrid,
    PairedFactor, PerPointSettings, Precision, StudyKind, SyntheticSpec, TrajectoryKind,
    TrajectorySettings,
};
pub use studies::{
    boundary_file_paths, run_boundary_study, run_paired_factor, run_per_point, run_sweep,
    run_trajectory_study, BoundaryStudyResult, PairedResult, PairedSide, PerPointStudyResult,
    SweepRow, TrajectoryStudyRow, PAIRED_HEADER, PER_POINT_HEADER, SWEEP_HEADER,
    TRAJECTORY_HEADER,
};
