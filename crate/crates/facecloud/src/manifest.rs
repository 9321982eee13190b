//! Dataset manifests: one JSON file describing every sample of a directory.

use std::fs;
use std::path::Path;

use facecloud_core::synth::HeadParams;
use facecloud_core::EyePair3D;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub const FORMAT_VERSION: u32 = 1;
pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Synthetic,
    Refined,
    Sampled,
    Masked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub id: String,
    /// Point file, relative to the manifest directory.
    pub path: String,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags_path: Option<String>,
    /// Ground-truth or detected eyes, needed by eye-anchored masks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eyes: Option<EyePair3D>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<HeadParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config_digest: String,
    pub seed: u64,
    pub kind: DatasetKind,
    pub n_classes: usize,
    pub entries: Vec<Entry>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let m: Manifest = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if m.format_version != FORMAT_VERSION {
            return Err(format!("unsupported manifest version {}", m.format_version));
        }
        if let Some(e) = m.entries.iter().find(|e| e.label >= m.n_classes) {
            return Err(format!("entry {} has label {} but n_classes is {}", e.id, e.label, m.n_classes));
        }
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> AppResult<()> {
        let path = dir.join(FILE_NAME);
        fs::write(&path, self.to_json()).map_err(|e| AppError::io(&path, e))
    }

    pub fn load(dir: &Path) -> AppResult<Self> {
        let path = dir.join(FILE_NAME);
        let text = fs::read_to_string(&path).map_err(|e| AppError::Mismatch(format!("{}: {e}", path.display())))?;
        Manifest::from_json(&text).map_err(|m| AppError::parse(&path, m))
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label).collect()
    }
}
