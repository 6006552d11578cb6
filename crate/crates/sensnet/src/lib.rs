//! Sensitivity measurement for small fully-connected classifiers.
//!
//! The crate trains bias-free MLPs and measures how sensitive the learned
//! function is to its inputs, using two complementary metrics:
//!
//! * the Frobenius norm of the Jacobian of softmax class probabilities with
//!   respect to the input, and
//! * the number of linear-region transitions the network's activation pattern
//!   undergoes along closed trajectories through input space.
//!
//! Supporting modules provide dataset ingestion ([`data`]), network evaluation
//! and analytic Jacobians ([`nn`]), training ([`train`]), trajectory and grid
//! generators ([`trajectory`]), the metrics themselves ([`sensitivity`]),
//! analytic loss↔norm envelopes ([`bounds`]), and a config-driven experiment
//! harness with CSV output ([`harness`]).
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); measurements
//! default to `f64`, and the aliases below name the common concrete types.

pub mod bounds;
pub mod data;
pub mod error;
pub mod harness;
pub mod nn;
pub mod seeds;
pub mod sensitivity;
pub mod train;
pub mod trajectory;

mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Bias-free MLP with 64-bit weights (the default precision).
pub type Mlp64 = nn::Mlp<f64>;
/// Bias-free MLP with 32-bit weights (fidelity mode).
pub type Mlp32 = nn::Mlp<f32>;
/// 64-bit dataset.
pub type Dataset64 = data::Dataset<f64>;
/// 32-bit dataset.
pub type Dataset32 = data::Dataset<f32>;
/// 64-bit closed trajectory.
pub type Trajectory64 = trajectory::Trajectory<f64>;
/// 32-bit closed trajectory.
pub type Trajectory32 = trajectory::Trajectory<f32>;
