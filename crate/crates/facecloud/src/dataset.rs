//! Reading and writing dataset directories.

use std::fs;
use std::path::{Path, PathBuf};

use facecloud_core::PointCloud;
use rayon::prelude::*;

use crate::error::{AppError, AppResult};
use crate::manifest::{Entry, Manifest};
use crate::ply;

pub const SAMPLE_DIR: &str = "samples";

#[derive(Debug, Clone)]
pub struct Sample {
    pub entry: Entry,
    pub cloud: PointCloud,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn load(dir: &Path) -> AppResult<Self> {
        let manifest = Manifest::load(dir)?;
        let samples = manifest
            .entries
            .par_iter()
            .map(|e| {
                let pts = ply::read_points(&dir.join(&e.path))?;
                let cloud = match &e.tags_path {
                    Some(t) => PointCloud::with_tags(pts, ply::read_tags(&dir.join(t))?),
                    None => PointCloud::new(pts),
                }
                .map_err(|err| AppError::parse(&dir.join(&e.path), err))?;
                Ok(Sample { entry: e.clone(), cloud })
            })
            .collect::<AppResult<Vec<_>>>()?;
        Ok(Dataset { dir: dir.to_path_buf(), manifest, samples })
    }

    pub fn labels(&self) -> Vec<usize> {
        self.manifest.labels()
    }

    pub fn labeled(&self) -> Vec<(&PointCloud, usize)> {
        self.samples.iter().map(|s| (&s.cloud, s.entry.label)).collect()
    }
}

/// Writes `cloud` (and its tags) under `dir/samples/`, returning the
/// manifest-relative paths.
pub fn write_sample(dir: &Path, id: &str, cloud: &PointCloud, comments: &[String]) -> AppResult<(String, Option<String>)> {
    let rel = format!("{SAMPLE_DIR}/{id}.ply");
    ply::write_ply(&dir.join(&rel), cloud, comments)?;
    let tags = match cloud.tags() {
        Some(t) => {
            let rel = format!("{SAMPLE_DIR}/{id}.tags");
            ply::write_tags(&dir.join(&rel), t)?;
            Some(rel)
        }
        None => None,
    };
    Ok((rel, tags))
}

pub fn create_sample_dir(dir: &Path) -> AppResult<()> {
    let d = dir.join(SAMPLE_DIR);
    fs::create_dir_all(&d).map_err(|e| AppError::io(&d, e))
}
