//! The single JSON configuration shared by every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use facecloud_core::facecrop::CropConfig;
use facecloud_core::pointnet::{ModelConfig, TrainConfig};
use facecloud_core::sampling::{MaskSpec, SampleSpec};
use facecloud_core::synth::ParamDistribution;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub face_only: bool,
    pub population: ParamDistribution,
    /// Used by `synth --shifted`.
    pub shifted: ParamDistribution,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_per_class: 60,
            face_only: false,
            population: ParamDistribution::default(),
            shifted: ParamDistribution::shifted(),
        }
    }
}

/// Dataset and output locations. Not part of the digest, so moving a run
/// does not change its outputs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root of every seeded stage.
    pub seed: u64,
    pub crop: CropConfig,
    pub sample: SampleSpec,
    pub mask: Option<MaskSpec>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub paths: Paths,
}

impl PipelineConfig {
    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> AppResult<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> AppResult<()> {
        self.crop.validate()?;
        self.sample.validate()?;
        if let Some(m) = &self.mask {
            m.validate()?;
        }
        self.model.validate()?;
        self.train.validate()?;
        self.synth.population.validate()?;
        self.synth.shifted.validate()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON with paths cleared.
    pub fn digest(&self) -> String {
        hex::encode(self.digest_bytes())
    }

    pub fn digest_bytes(&self) -> [u8; 32] {
        let mut c = self.clone();
        c.paths = Paths::default();
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json).into()
    }
}

/// Creates `dir` and checks that it accepts files.
pub fn ensure_output_dir(dir: &Path) -> AppResult<()> {
    fs::create_dir_all(dir).map_err(|e| AppError::Config(format!("output directory {}: {e}", dir.display())))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| AppError::Config(format!("output directory {} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(probe);
    Ok(())
}
