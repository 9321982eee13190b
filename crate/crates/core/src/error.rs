use alloc::boxed::Box;
use alloc::string::String;

use crate::facecrop::Stage;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("pointcloud is empty")]
    EmptyCloud,
    #[error("pointcloud extent is too small to rasterize")]
    DegenerateExtent,
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("no plausible eye pair found")]
    EyesNotFound,
    #[error("both x-z eyes match the same x-y eye")]
    AmbiguousMatch,
    #[error("matched eye x-coordinates differ by {dx:.3} mm (tolerance {tolerance:.3} mm)")]
    InconsistentX { dx: f64, tolerance: f64 },
    #[error("degenerate crop geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("crop retained no points")]
    EmptyResult,
    #[error("k = {k} exceeds cloud size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("mask removed every point")]
    MaskRemovesAll,
    #[error("mask strategy requires eye positions")]
    EyesRequired,
    #[error("cloud has {have} points, model needs at least {need}")]
    CloudTooSmall { need: usize, have: usize },
    #[error("subset has fewer than one sample for class {class}")]
    SubsetTooSmall { class: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("refine failed at {stage} stage: {source}")]
    Refine { stage: Stage, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field, reason: reason.into() }
    }

    /// Strips any [`Error::Refine`] wrapper.
    pub fn root(&self) -> &Error {
        match self {
            Error::Refine { source, .. } => source.root(),
            other => other,
        }
    }
}
