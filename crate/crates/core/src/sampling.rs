//! Farthest point sampling, k-nearest-neighbor grouping and coverage masks.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bounding_box, Aabb, EyePair3D, PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSpec {
    pub n_centroids: usize,
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { n_centroids: 512, k_neighbors: 16, seed: 0 }
    }
}

impl SampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_centroids == 0 {
            return Err(Error::invalid("n_centroids", "must be at least 1"));
        }
        if self.k_neighbors == 0 {
            return Err(Error::invalid("k_neighbors", "must be at least 1"));
        }
        Ok(())
    }
}

/// Farthest point sampling from a seeded uniform start. Returns all indices
/// in order when `n >= cloud.len()`.
pub fn fps(cloud: &PointCloud, n: usize, seed: u64) -> Result<Vec<usize>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let start = crate::seed::rng(seed).random_range(0..cloud.len());
    Ok(fps_from(cloud.points(), n, start))
}

/// Farthest point sampling starting at `start`. Each step picks the point
/// with the largest distance to the selected set, lowest index on ties.
///
/// # Panics
/// If `points` is non-empty and `start` is out of range.
pub fn fps_from(points: &[Vec3], n: usize, start: usize) -> Vec<usize> {
    let len = points.len();
    if n >= len {
        return (0..len).collect();
    }
    assert!(start < len, "start index out of range");
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let mut min_d = vec![f64::INFINITY; len];
    let mut cur = start;
    out.push(cur);
    while out.len() < n {
        let c = points[cur];
        let mut best = 0;
        let mut best_d = -1.0;
        for (i, (p, d)) in points.iter().zip(min_d.iter_mut()).enumerate() {
            let di = p.dist_sq(c);
            if di < *d {
                *d = di;
            }
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        cur = best;
        out.push(cur);
    }
    out
}

/// Largest distance from any point to its nearest selected point.
pub fn fill_distance(points: &[Vec3], selected: &[usize]) -> f64 {
    let worst = points
        .iter()
        .map(|p| selected.iter().map(|&s| p.dist_sq(points[s])).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    libm::sqrt(worst)
}

/// The `k` nearest points to each centroid, sorted by squared distance then
/// index. A centroid is its own nearest neighbor.
pub fn knn_group(cloud: &PointCloud, centroids: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    knn_points(cloud.points(), centroids, k)
}

pub fn knn_points(points: &[Vec3], centroids: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    let n = points.len();
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    if centroids.iter().any(|&c| c >= n) {
        return Err(Error::invalid("centroids", "index out of range"));
    }
    let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(n);
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    Ok(centroids
        .iter()
        .map(|&c| {
            let q = points[c];
            keyed.clear();
            keyed.extend(points.iter().enumerate().map(|(i, p)| (p.dist_sq(q), i)));
            if k < n {
                keyed.select_nth_unstable_by(k - 1, cmp);
            }
            let head = &mut keyed[..k];
            head.sort_unstable_by(cmp);
            head.iter().map(|&(_, i)| i).collect()
        })
        .collect())
}

/// FPS down to `n` points, keeping tags.
pub fn downsample(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    let idx = fps(cloud, n, seed)?;
    Ok(cloud.select(&idx))
}

/// Visible-region presets emulating wearable sensor coverage. Fractions
/// refer to the bounding box of the cloud being masked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum MaskSpec {
    /// Horizontal band centered on the mean eye height, `band_fraction` of
    /// the box height tall.
    GlassesBand { band_fraction: f64 },
    /// Everything above the eye line minus `offset_fraction` of the box
    /// height is hidden.
    UpperFaceOccluded { offset_fraction: f64 },
    /// Fractional axis-aligned box, inclusive.
    CustomBox { min: [f64; 3], max: [f64; 3] },
}

impl MaskSpec {
    pub const GLASSES: MaskSpec = MaskSpec::GlassesBand { band_fraction: 0.35 };
    pub const HMD: MaskSpec = MaskSpec::UpperFaceOccluded { offset_fraction: 0.0 };
    pub const FULL: MaskSpec = MaskSpec::CustomBox { min: [0.0; 3], max: [1.0; 3] };

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        match *self {
            MaskSpec::GlassesBand { band_fraction: f } | MaskSpec::UpperFaceOccluded { offset_fraction: f } => {
                if !unit(f) {
                    return Err(Error::invalid("mask", "fraction must lie in [0, 1]"));
                }
            }
            MaskSpec::CustomBox { min, max } => {
                if !min.iter().chain(&max).all(|&v| unit(v)) {
                    return Err(Error::invalid("mask", "box fractions must lie in [0, 1]"));
                }
                if !(0..3).all(|a| min[a] < max[a]) {
                    return Err(Error::invalid("mask", "box needs min < max on every axis"));
                }
            }
        }
        Ok(())
    }

    pub fn needs_eyes(&self) -> bool {
        !matches!(self, MaskSpec::CustomBox { .. })
    }

    /// Short name used in reports.
    pub fn label(&self) -> String {
        use alloc::format;
        match *self {
            MaskSpec::GlassesBand { band_fraction } => format!("glasses({band_fraction})"),
            MaskSpec::UpperFaceOccluded { offset_fraction } => format!("hmd({offset_fraction})"),
            MaskSpec::CustomBox { min, max } => format!(
                "box({},{},{},{},{},{})",
                min[0], max[0], min[1], max[1], min[2], max[2]
            ),
        }
    }

    /// Fixes the mask geometry against a reference box and eye pair.
    pub fn resolve(&self, reference: &Aabb, eyes: Option<&EyePair3D>) -> Result<RegionMask> {
        self.validate()?;
        let ext = reference.extent();
        let eye_y = || -> Result<f64> {
            let e = eyes.ok_or(Error::EyesRequired)?;
            Ok(0.5 * (e.left.y + e.right.y))
        };
        let inf = f64::INFINITY;
        Ok(match *self {
            MaskSpec::GlassesBand { band_fraction } => {
                let (y, half) = (eye_y()?, 0.5 * band_fraction * ext.y);
                RegionMask { min: Vec3::new(-inf, y - half, -inf), max: Vec3::new(inf, y + half, inf) }
            }
            MaskSpec::UpperFaceOccluded { offset_fraction } => {
                let top = eye_y()? - offset_fraction * ext.y;
                RegionMask { min: Vec3::new(-inf, -inf, -inf), max: Vec3::new(inf, top, inf) }
            }
            MaskSpec::CustomBox { min, max } => {
                let at = |f: [f64; 3]| {
                    Vec3::new(
                        reference.min.x + f[0] * ext.x,
                        reference.min.y + f[1] * ext.y,
                        reference.min.z + f[2] * ext.z,
                    )
                };
                let (mut lo, mut hi) = (at(min), at(max));
                // Fractions 0 and 1 reach the box faces exactly.
                for a in 0..3 {
                    if min[a] == 0.0 {
                        set_axis(&mut lo, a, -inf);
                    }
                    if max[a] == 1.0 {
                        set_axis(&mut hi, a, inf);
                    }
                }
                RegionMask { min: lo, max: hi }
            }
        })
    }
}

fn set_axis(v: &mut Vec3, axis: usize, value: f64) {
    match axis {
        0 => v.x = value,
        1 => v.y = value,
        _ => v.z = value,
    }
}

impl FromStr for MaskSpec {
    type Err = Error;

    /// `glasses`, `hmd`, `full` or `box:x0,x1,y0,y1,z0,z1`.
    fn from_str(s: &str) -> Result<Self> {
        let spec = match s {
            "glasses" => MaskSpec::GLASSES,
            "hmd" => MaskSpec::HMD,
            "full" => MaskSpec::FULL,
            _ => {
                let body = s.strip_prefix("box:").ok_or_else(|| Error::invalid("mask", "expected glasses, hmd, full or box:..."))?;
                let v: Vec<f64> = body
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| Error::invalid("mask", "box values must be numbers")))
                    .collect::<Result<_>>()?;
                if v.len() != 6 {
                    return Err(Error::invalid("mask", "box needs six values x0,x1,y0,y1,z0,z1"));
                }
                MaskSpec::CustomBox { min: [v[0], v[2], v[4]], max: [v[1], v[3], v[5]] }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A mask with its geometry fixed; an inclusive axis-aligned region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMask {
    pub min: Vec3,
    pub max: Vec3,
}

impl RegionMask {
    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|a| self.min[a] <= p[a] && p[a] <= self.max[a])
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<PointCloud> {
        let out = cloud.retain_where(|p| self.contains(p));
        if out.is_empty() {
            return Err(Error::MaskRemovesAll);
        }
        Ok(out)
    }
}

/// Masks `cloud` with fractions taken against its own bounding box.
pub fn apply_mask(cloud: &PointCloud, spec: &MaskSpec, eyes: Option<&EyePair3D>) -> Result<PointCloud> {
    let bbox = bounding_box(cloud)?;
    spec.resolve(&bbox, eyes)?.apply(cloud)
}
