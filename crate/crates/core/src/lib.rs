//! Facial pointcloud refinement and point-set expression classification.
//!
//! The crate is `no_std` and only needs an allocator. It covers the whole
//! numeric side of the system:
//!
//! - [`geometry`]: points, clouds, crop planes and eye pairs.
//! - [`raster`]: binary projections, morphology and Canny edges.
//! - [`hough`]: circle detection, eye-pair selection and cross-projection
//!   matching.
//! - [`facecrop`]: the crop plane and the end-to-end [`facecrop::refine`]
//!   pipeline.
//! - [`sampling`]: farthest point sampling, kNN grouping and coverage masks.
//! - [`synth`]: a parametric synthetic head generator with ground truth.
//! - [`pointnet`]: a small set-abstraction classifier with manual gradients.
//! - [`linkbudget`]: point spacing to radar bandwidth conversion.
//!
//! File formats, timing and the command-line driver live in the `facecloud`
//! crate.

#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod facecrop;
pub mod geometry;
pub mod hough;
pub mod linkbudget;
pub mod pointnet;
pub mod raster;
pub mod sampling;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{Aabb, CropPlane, EyePair3D, PointCloud, Vec3};
