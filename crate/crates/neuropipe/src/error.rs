//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by any pipeline stage.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- volume I/O ---
    #[error("unknown volume format: {path} (no recognized extension or hint)")]
    UnknownFormat { path: PathBuf },
    #[error("corrupt header in {path}: {reason}")]
    CorruptHeader { path: PathBuf, reason: String },
    #[error("non-finite voxel data in {path}")]
    NonFiniteData { path: PathBuf },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    // --- geometry / slicing ---
    #[error("slice index {index} out of range (extent {extent})")]
    IndexOutOfRange { index: usize, extent: usize },
    #[error("VOI out of bounds: {reason}")]
    VoiOutOfBounds { reason: String },
    #[error("shape mismatch: {reason}")]
    ShapeMismatch { reason: String },
    #[error("duplicate modality in stack: {0}")]
    DuplicateModality(String),
    #[error("provenance mismatch: {reason}")]
    ProvenanceMismatch { reason: String },

    // --- augmentation ---
    #[error("contrast factor must be positive, got {0}")]
    NonPositiveFactor(f64),
    #[error("rescale would produce a degenerate output ({h}x{w})")]
    DegenerateOutput { h: i64, w: i64 },

    // --- operators ---
    #[error("pooling window {kh}x{kw} larger than input {h}x{w}")]
    WindowTooLarge { kh: usize, kw: usize, h: usize, w: usize },
    #[error("ROI out of bounds: {reason}")]
    RoiOutOfBounds { reason: String },
    #[error("ROI spans {got_h}x{got_w} cells, needs at least {need_h}x{need_w}")]
    RoiTooSmall { got_h: usize, got_w: usize, need_h: usize, need_w: usize },
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("loss weight must be non-negative, got {0}")]
    NegativeWeight(f64),

    // --- models ---
    #[error("bad model config: {reason}")]
    BadConfig { reason: String },
    #[error("wrong input channels: {reason}")]
    WrongChannels { reason: String },
    #[error("wrong input size: expected {expected}x{expected}, got {h}x{w}")]
    WrongSize { expected: usize, h: usize, w: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("loss diverged at iteration {iteration}: {diagnostics}")]
    DivergedLoss { iteration: u64, diagnostics: String },
    #[error("proposal mode requires ground-truth boxes but none were given")]
    MissingTruth,
    #[error("modality subset is empty")]
    EmptySubset,

    // --- metrics ---
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("metric undefined: {reason}")]
    UndefinedMetric { reason: String },

    // --- synthetic data ---
    #[error("synthetic spec is infeasible: {reason}")]
    SpecInfeasible { reason: String },

    // --- harness ---
    #[error("config error: {reason}")]
    Config { reason: String },
    #[error("checkpoint error: {reason}")]
    Checkpoint { reason: String },
    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub fn config(reason: impl Into<String>) -> Self {
        Error::Config { reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
