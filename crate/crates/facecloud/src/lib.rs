//! File formats, experiment protocols and the command-line driver on top
//! of [`facecloud_core`].
//!
//! Pointclouds are stored as ASCII PLY (CSV accepted on input), datasets as
//! a directory with a `manifest.json`, models as `FPNM` checkpoints and
//! reports as JSON or CSV. Every artifact records the digest of the
//! configuration that produced it.

pub mod checkpoint;
pub mod cli;
pub mod clock;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod manifest;
pub mod pgm;
pub mod ply;
pub mod report;

pub use error::{AppError, AppResult};
