//! Crop-plane construction and the end-to-end refinement pipeline.
//!
//! `refine` projects the cloud onto the x-y and z-x planes, cleans each
//! binary image with morphology, extracts Canny edges, finds eye-orbit
//! circles with a Hough transform and matches the two projections into 3D
//! eye centers. A plane is then placed behind the eyes, offset toward the
//! head center by a multiple of the orbit radius and containing the world
//! `y` axis, and every point on its positive side is kept.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CropPlane, EyePair3D, PointCloud, Vec3};
use crate::hough::{
    hough_circles, match_projections, rank_eye_pairs, EyePair2D, HoughParams, PairRules, PixelCorrection, ScoredCircle,
};
use crate::raster::{canny, dilate, dilate_background, project, AxisPair, BinaryImage, CannyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Projection,
    Morphology,
    Edges,
    Hough,
    Matching,
    Plane,
    Crop,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Projection, Stage::Morphology, Stage::Edges, Stage::Hough, Stage::Matching, Stage::Plane, Stage::Crop];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Projection => "projection",
            Stage::Morphology => "morphology",
            Stage::Edges => "edges",
            Stage::Hough => "hough",
            Stage::Matching => "matching",
            Stage::Plane => "plane",
            Stage::Crop => "crop",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which pixels the morphology step dilates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphologyTarget {
    /// Grow the point pixels.
    Foreground,
    /// Grow the empty pixels, which strips sparse point speckle and keeps
    /// dense regions.
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropConfig {
    /// Offset of the plane reference points, in orbit radii.
    pub radius_factor: f64,
    pub resolution: usize,
    /// `(h, w)` structuring element for the x-y projection.
    pub kernel_xy: (usize, usize),
    /// `(h, w)` structuring element for the z-x projection.
    pub kernel_zx: (usize, usize),
    pub morphology: MorphologyTarget,
    /// Undo the translation and growth/shrinkage that the anchored kernel
    /// applies to detected circles.
    pub compensate_kernel: bool,
    pub canny: CannyParams,
    pub hough: HoughParams,
    /// Allowed eye-center distance as fractions of the image width.
    pub eye_distance_band: (f64, f64),
    /// Accepted circle radius in world millimetres.
    pub eye_radius_mm: (f64, f64),
    pub pair_rules: PairRules,
    /// Candidate pairs kept per projection for cross-projection matching.
    pub pair_candidates: usize,
    /// Allowed x disagreement between projections, in x-y pixels.
    pub x_tolerance_px: f64,
}

impl Default for CropConfig {
    fn default() -> Self {
        CropConfig {
            radius_factor: 2.3,
            resolution: 128,
            kernel_xy: (2, 5),
            kernel_zx: (1, 2),
            morphology: MorphologyTarget::Background,
            compensate_kernel: true,
            canny: CannyParams::default(),
            hough: HoughParams::default(),
            eye_distance_band: (0.15, 0.45),
            eye_radius_mm: (9.0, 20.0),
            pair_rules: PairRules::default(),
            pair_candidates: 8,
            x_tolerance_px: 3.0,
        }
    }
}

impl CropConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_factor > 0.0 && self.radius_factor.is_finite()) {
            return Err(Error::invalid("radius_factor", "must be positive"));
        }
        if self.resolution < crate::raster::MIN_SIDE {
            return Err(Error::invalid("resolution", "must be at least 8 pixels"));
        }
        for k in [self.kernel_xy, self.kernel_zx] {
            if k.0 == 0 || k.1 == 0 {
                return Err(Error::invalid("kernel", "dimensions must be at least 1"));
            }
        }
        self.canny.validate()?;
        let h = &self.hough;
        if h.r_min < 3 || h.r_min > h.r_max || h.r_max > self.resolution / 2 {
            return Err(Error::invalid("hough", "need 3 <= r_min <= r_max <= resolution / 2"));
        }
        let (lo, hi) = self.eye_distance_band;
        if !(0.0 <= lo && lo < hi) {
            return Err(Error::invalid("eye_distance_band", "need 0 <= lo < hi"));
        }
        let (rlo, rhi) = self.eye_radius_mm;
        if !(0.0 <= rlo && rlo < rhi) {
            return Err(Error::invalid("eye_radius_mm", "need 0 <= lo < hi"));
        }
        if self.pair_candidates == 0 {
            return Err(Error::invalid("pair_candidates", "must be at least 1"));
        }
        if !(self.x_tolerance_px > 0.0) {
            return Err(Error::invalid("x_tolerance_px", "must be positive"));
        }
        Ok(())
    }

    fn kernel(&self, axis: AxisPair) -> (usize, usize) {
        match axis {
            AxisPair::XY => self.kernel_xy,
            AxisPair::ZX => self.kernel_zx,
        }
    }

    fn correction(&self, axis: AxisPair) -> PixelCorrection {
        if !self.compensate_kernel {
            return PixelCorrection::default();
        }
        let (h, w) = self.kernel(axis);
        let (hw, hh) = ((w - 1) as f64 * 0.5, (h - 1) as f64 * 0.5);
        let grow = 0.5 * (hw + hh);
        PixelCorrection {
            du: -hw,
            dv: -hh,
            dr: match self.morphology {
                MorphologyTarget::Foreground => -grow,
                MorphologyTarget::Background => grow,
            },
        }
    }
}

/// Builds the crop plane from a detected eye pair. Each eye center is moved
/// `factor * radius` toward the origin; the plane contains the segment
/// between the two moved points and the world `y` direction, and is
/// oriented so the eyes lie on its positive side.
pub fn build_crop_plane(eyes: &EyePair3D, factor: f64) -> Result<CropPlane> {
    if !(factor >= 0.0 && factor.is_finite()) {
        return Err(Error::invalid("radius_factor", "must be finite and non-negative"));
    }
    let toward_origin = |e: Vec3, r: f64| -> Result<Vec3> {
        let dir = e.normalized().ok_or(Error::DegenerateGeometry("eye at the origin"))?;
        Ok(e - dir * (factor * r))
    };
    let p_left = toward_origin(eyes.left, eyes.radius_left)?;
    let p_right = toward_origin(eyes.right, eyes.radius_right)?;
    let across = p_right - p_left;
    let n = across.cross(Vec3::Y);
    if n.norm() < 1e-9 {
        return Err(Error::DegenerateGeometry("eye line parallel to the y axis"));
    }
    let plane = CropPlane::through_point(n, p_right)?;
    let mid = eyes.midpoint();
    let side = plane.signed_distance(mid);
    let side = if libm::fabs(side) > 1e-12 * (1.0 + mid.norm()) {
        side
    } else {
        // Zero offset puts the eyes on the plane; fall back to keeping the
        // origin on the negative side.
        -plane.offset()
    };
    if side == 0.0 {
        return Err(Error::DegenerateGeometry("plane passes through the eyes and the origin"));
    }
    Ok(if side > 0.0 { plane } else { plane.flipped() })
}

/// Keeps the points strictly on the positive side of `plane`.
pub fn crop(cloud: &PointCloud, plane: &CropPlane) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let out = cloud.retain_where(|p| plane.signed_distance(p) > 0.0);
    if out.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok(out)
}

/// Monotonic milliseconds; the std crate plugs in a real clock.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub projection: f64,
    pub morphology: f64,
    pub edges: f64,
    pub hough: f64,
    pub matching: f64,
    pub plane: f64,
    pub crop: f64,
}

impl StageTimings {
    fn slot(&mut self, s: Stage) -> &mut f64 {
        match s {
            Stage::Projection => &mut self.projection,
            Stage::Morphology => &mut self.morphology,
            Stage::Edges => &mut self.edges,
            Stage::Hough => &mut self.hough,
            Stage::Matching => &mut self.matching,
            Stage::Plane => &mut self.plane,
            Stage::Crop => &mut self.crop,
        }
    }

    pub fn total(&self) -> f64 {
        self.projection + self.morphology + self.edges + self.hough + self.matching + self.plane + self.crop
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    pub eyes: EyePair3D,
    pub plane: CropPlane,
    pub input_points: usize,
    pub retained_points: usize,
    pub retained_fraction: f64,
    pub timings_ms: StageTimings,
}

/// Intermediate images and detections of one projection.
#[derive(Debug, Clone)]
pub struct ProjectionTrace {
    pub axis: AxisPair,
    pub raw: BinaryImage,
    pub morphed: BinaryImage,
    pub edges: BinaryImage,
    /// Detections after kernel compensation, best first.
    pub circles: Vec<ScoredCircle>,
    pub pair: Option<EyePair2D>,
}

#[derive(Debug, Clone, Default)]
pub struct RefineTrace {
    pub projections: Vec<ProjectionTrace>,
}

struct Timer<'a> {
    clock: &'a dyn Clock,
    timings: StageTimings,
}

impl Timer<'_> {
    fn run<T>(&mut self, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t0 = self.clock.now_ms();
        let out = f();
        *self.timings.slot(stage) += self.clock.now_ms() - t0;
        out.map_err(|e| Error::Refine { stage, source: Box::new(e) })
    }
}

fn detect_pair(
    cloud: &PointCloud,
    axis: AxisPair,
    cfg: &CropConfig,
    timer: &mut Timer<'_>,
    trace: &mut RefineTrace,
) -> Result<(Vec<EyePair2D>, crate::raster::RasterTransform)> {
    let raw = timer.run(Stage::Projection, || project(cloud, axis, cfg.resolution))?;
    let kernel = cfg.kernel(axis);
    let morphed = timer.run(Stage::Morphology, || match cfg.morphology {
        MorphologyTarget::Foreground => dilate(&raw, kernel),
        MorphologyTarget::Background => dilate_background(&raw, kernel),
    })?;
    let edges = timer.run(Stage::Edges, || canny(&morphed, &cfg.canny))?;
    let correction = cfg.correction(axis);
    let scale = raw.transform().scale;
    let (rlo, rhi) = cfg.eye_radius_mm;
    let h = cfg.hough;
    let r_lo = (libm::ceil(rlo / scale - correction.dr).max(0.0) as usize).max(h.r_min);
    let r_hi = (libm::floor(rhi / scale - correction.dr).max(0.0) as usize).min(h.r_max);
    let circles: Vec<ScoredCircle> = timer.run(Stage::Hough, || {
        if r_lo > r_hi {
            return Ok(Vec::new());
        }
        Ok(hough_circles(&edges, r_lo, r_hi, h.min_confidence)?
            .iter()
            .map(|c| correction.apply(c))
            .filter(|c| (rlo..=rhi).contains(&(c.radius * scale)))
            .collect())
    })?;
    let width = cfg.resolution as f64;
    let (lo, hi) = cfg.eye_distance_band;
    let pairs = timer.run(Stage::Hough, || {
        let ranked = rank_eye_pairs(&circles, lo * width, hi * width, axis, &cfg.pair_rules, cfg.pair_candidates)?;
        if ranked.is_empty() {
            return Err(Error::EyesNotFound);
        }
        Ok(ranked)
    });
    let transform = *raw.transform();
    let pair = pairs.as_ref().ok().map(|p| p[0]);
    trace.projections.push(ProjectionTrace { axis, raw, morphed, edges, circles, pair });
    Ok((pairs?, transform))
}

/// Tries candidate combinations by decreasing summed confidence and keeps
/// the first whose projections agree in x and in world-space eye radius.
/// The error reported on failure is the one from the best-scoring
/// combination.
fn match_candidates(
    xy: &[EyePair2D],
    zx: &[EyePair2D],
    xy_t: &crate::raster::RasterTransform,
    zx_t: &crate::raster::RasterTransform,
    tol: f64,
    min_radius_ratio: f64,
) -> Result<EyePair3D> {
    let radii_agree = |a: &EyePair2D, b: &EyePair2D| {
        let ra = 0.5 * (a.left.radius + a.right.radius) * xy_t.scale;
        let rb = 0.5 * (b.left.radius + b.right.radius) * zx_t.scale;
        ra.min(rb) >= min_radius_ratio * ra.max(rb)
    };
    let score = |p: &EyePair2D| p.left.confidence + p.right.confidence;
    let mut combos: Vec<(usize, usize)> = (0..xy.len()).flat_map(|i| (0..zx.len()).map(move |j| (i, j))).collect();
    combos.sort_by(|a, b| {
        (score(&xy[b.0]) + score(&zx[b.1])).total_cmp(&(score(&xy[a.0]) + score(&zx[a.1]))).then(a.cmp(b))
    });
    let mut first_err = None;
    for (i, j) in combos {
        if !radii_agree(&xy[i], &zx[j]) {
            first_err.get_or_insert(Error::AmbiguousMatch);
            continue;
        }
        match match_projections(&xy[i], &zx[j], xy_t, zx_t, Some(tol)) {
            Ok(e) => return Ok(e),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.unwrap_or(Error::EyesNotFound))
}

/// Full refinement with intermediate results and stage timings from `clock`.
/// Failures are wrapped in [`Error::Refine`] naming the failing stage.
pub fn refine_traced(
    cloud: &PointCloud,
    cfg: &CropConfig,
    clock: &dyn Clock,
) -> (Result<(PointCloud, RefineReport)>, RefineTrace) {
    let mut trace = RefineTrace::default();
    let res = refine_inner(cloud, cfg, clock, &mut trace);
    (res, trace)
}

fn refine_inner(
    cloud: &PointCloud,
    cfg: &CropConfig,
    clock: &dyn Clock,
    trace: &mut RefineTrace,
) -> Result<(PointCloud, RefineReport)> {
    cfg.validate()?;
    if cloud.is_empty() {
        return Err(Error::Refine { stage: Stage::Projection, source: Box::new(Error::EmptyCloud) });
    }
    let mut timer = Timer { clock, timings: StageTimings::default() };
    let (xy, xy_t) = detect_pair(cloud, AxisPair::XY, cfg, &mut timer, trace)?;
    let (zx, zx_t) = detect_pair(cloud, AxisPair::ZX, cfg, &mut timer, trace)?;
    let tol = cfg.x_tolerance_px * xy_t.scale;
    let eyes = timer.run(Stage::Matching, || match_candidates(&xy, &zx, &xy_t, &zx_t, tol, cfg.pair_rules.min_radius_ratio))?;
    let plane = timer.run(Stage::Plane, || build_crop_plane(&eyes, cfg.radius_factor))?;
    let out = timer.run(Stage::Crop, || crop(cloud, &plane))?;
    let report = RefineReport {
        eyes,
        plane,
        input_points: cloud.len(),
        retained_points: out.len(),
        retained_fraction: out.len() as f64 / cloud.len() as f64,
        timings_ms: timer.timings,
    };
    Ok((out, report))
}

/// Refines `cloud` to its facial region.
pub fn refine(cloud: &PointCloud, cfg: &CropConfig) -> Result<(PointCloud, RefineReport)> {
    let mut trace = RefineTrace::default();
    refine_inner(cloud, cfg, &NoClock, &mut trace)
}
