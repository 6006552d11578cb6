//! Error taxonomy shared by every module.
//!
//! Variants group into format errors (IDX parsing, checkpoints), consistency
//! errors (shape and label mismatches), numeric errors (non-finite values,
//! training divergence), parameter errors (invalid sample counts, windows,
//! class counts), and data errors (degenerate inputs, unavailable anchors).

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying file I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file did not follow the IDX binary layout.
    #[error("idx format error: {0}")]
    IdxFormat(String),

    /// Two inputs that must agree (image/label counts, matrix shapes) did not.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// A vector or matrix had the wrong dimensions for the operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// A label was outside `[0, n_classes)`.
    #[error("label error: {0}")]
    Label(String),

    /// An argument was outside the operation's admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Too few samples to honor the requested construction.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// A computation produced or received a non-finite value.
    #[error("numeric error: {0}")]
    NonFinite(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    /// Input data was degenerate for the operation (e.g. a constant vector).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Anchor points were missing, duplicated, or otherwise unusable.
    #[error("anchor error: {0}")]
    Anchor(String),

    /// A checkpoint file was malformed or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// An experiment configuration was invalid; the message names the key.
    #[error("config error: {0}")]
    Config(String),

    /// A CSV file could not be written or read.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
