//! `FPNM` model checkpoints.
//!
//! Layout, little-endian:
//!
//! ```text
//! "FPNM" | u32 version | [u8; 32] pipeline config digest
//!        | u32 n | n bytes of ModelConfig JSON
//!        | u64 count | count x f64 parameters
//! ```

use std::fs;
use std::path::Path;

use facecloud_core::pointnet::{ModelConfig, ModelParams};

use crate::error::{AppError, AppResult};

pub const MAGIC: &[u8; 4] = b"FPNM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_digest: [u8; 32],
    pub model: ModelConfig,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let json = serde_json::to_vec(&self.model).expect("model config serializes");
        let mut out = Vec::with_capacity(52 + json.len() + 8 * self.params.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.config_digest);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(self.params.values.len() as u64).to_le_bytes());
        for v in &self.params.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err("not an FPNM checkpoint".into());
        }
        let version = u32::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(format!("unsupported checkpoint version {version}"));
        }
        let config_digest: [u8; 32] = r.array()?;
        let n = u32::from_le_bytes(r.array()?) as usize;
        let model: ModelConfig = serde_json::from_slice(r.take(n)?).map_err(|e| format!("model config: {e}"))?;
        let count = u64::from_le_bytes(r.array()?) as usize;
        if count != model.param_count() {
            return Err(format!("{count} parameters stored, model config implies {}", model.param_count()));
        }
        let values = (0..count).map(|_| r.array().map(f64::from_le_bytes)).collect::<Result<Vec<_>, _>>()?;
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        let params = ModelParams::from_values(&model, values).map_err(|e| e.to_string())?;
        Ok(Checkpoint { config_digest, model, params })
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        fs::write(path, self.to_bytes()).map_err(|e| AppError::io(path, e))
    }

    /// Loads and checks that the stored model matches `expected`.
    pub fn load(path: &Path, expected: &ModelConfig) -> AppResult<Self> {
        let bytes = fs::read(path).map_err(|e| AppError::Mismatch(format!("{}: {e}", path.display())))?;
        let ck = Checkpoint::from_bytes(&bytes).map_err(|m| AppError::parse(path, m))?;
        if &ck.model != expected {
            return Err(AppError::parse(path, "checkpoint model config differs from the configured model"));
        }
        Ok(ck)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated checkpoint")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], String> {
        Ok(self.take(N)?.try_into().unwrap())
    }
}
