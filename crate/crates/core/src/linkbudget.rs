//! Point spacing on the face versus the radar bandwidth needed to resolve
//! it, via range resolution `x_r = c / (2 B)`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light, m/s.
pub const C: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaceModel {
    pub width: f64,
    pub height: f64,
}

impl Default for FaceModel {
    fn default() -> Self {
        FaceModel { width: 0.16, height: 0.24 }
    }
}

impl FaceModel {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::invalid("face", "width and height must be positive"));
        }
        Ok(FaceModel { width, height })
    }

    /// Surface area, m^2.
    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// How point count maps to spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpacingRule {
    /// `sqrt(area / n)`: side of the square cell each point covers.
    #[default]
    SqrtAreaPerPoint,
    /// `area / sqrt(n)`, read literally. Not a length; kept for comparison.
    AreaOverSqrtN,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub n_points: usize,
    /// Point spacing, m.
    pub spacing: f64,
    /// Required bandwidth, Hz.
    pub bandwidth: f64,
}

pub fn spacing_with(n: usize, face: &FaceModel, rule: SpacingRule) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one point"));
    }
    let n = n as f64;
    Ok(match rule {
        SpacingRule::SqrtAreaPerPoint => libm::sqrt(face.area() / n),
        SpacingRule::AreaOverSqrtN => face.area() / libm::sqrt(n),
    })
}

pub fn spacing(n: usize, face: &FaceModel) -> Result<f64> {
    spacing_with(n, face, SpacingRule::SqrtAreaPerPoint)
}

/// Bandwidth resolving `x_r` metres in range.
pub fn bandwidth(x_r: f64) -> Result<f64> {
    if !(x_r > 0.0 && x_r.is_finite()) {
        return Err(Error::invalid("x_r", "must be positive"));
    }
    Ok(C / (2.0 * x_r))
}

/// Range resolution of bandwidth `b` Hz.
pub fn resolution(b: f64) -> Result<f64> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::invalid("bandwidth", "must be positive"));
    }
    Ok(C / (2.0 * b))
}

pub fn sweep(n_list: &[usize], face: &FaceModel, rule: SpacingRule) -> Result<Vec<Budget>> {
    n_list
        .iter()
        .map(|&n| {
            let s = spacing_with(n, face, rule)?;
            Ok(Budget { n_points: n, spacing: s, bandwidth: bandwidth(s)? })
        })
        .collect()
}
