//! Circle Hough transform, eye-pair selection and cross-projection matching.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{EyePair3D, Vec3};
use crate::raster::{AxisPair, BinaryImage, RasterTransform};

/// Directions swept per edge pixel and radius.
pub const VOTE_ANGLES: usize = 64;

/// Detected circles closer than this (pixels) are treated as duplicates.
pub const DUPLICATE_RADIUS_PX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredCircle {
    /// `(u, v)` in pixels, sub-pixel refined.
    pub center: (f64, f64),
    pub radius: f64,
    pub votes: u32,
    /// `votes / (2 pi radius)`.
    pub confidence: f64,
}

impl ScoredCircle {
    fn distance(&self, o: &ScoredCircle) -> f64 {
        libm::hypot(self.center.0 - o.center.0, self.center.1 - o.center.1)
    }

    /// Pixel coordinate that runs along world x in `axis`.
    pub fn x_coord(&self, axis: AxisPair) -> f64 {
        if axis.x_is_u() {
            self.center.0
        } else {
            self.center.1
        }
    }

    fn total_cmp(&self, o: &ScoredCircle) -> Ordering {
        self.center
            .0
            .total_cmp(&o.center.0)
            .then(self.center.1.total_cmp(&o.center.1))
            .then(self.radius.total_cmp(&o.radius))
            .then(self.votes.cmp(&o.votes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoughParams {
    pub r_min: usize,
    pub r_max: usize,
    pub min_confidence: f64,
}

impl Default for HoughParams {
    fn default() -> Self {
        HoughParams { r_min: 4, r_max: 16, min_confidence: 0.35 }
    }
}

/// Integer pixel offsets of a radius-`r` circle sampled at [`VOTE_ANGLES`]
/// directions, rounded and deduplicated so each edge pixel votes at most
/// once per accumulator cell.
fn circle_offsets(r: usize) -> Vec<(i64, i64)> {
    let mut offs: Vec<(i64, i64)> = (0..VOTE_ANGLES)
        .map(|k| {
            let (s, c) = libm::sincos(2.0 * PI * k as f64 / VOTE_ANGLES as f64);
            (libm::round(r as f64 * c) as i64, libm::round(r as f64 * s) as i64)
        })
        .collect();
    offs.sort_unstable();
    offs.dedup();
    offs
}

/// Vote accumulator over `(r, v, u)`.
#[derive(Debug, Clone)]
pub struct Accumulator {
    pub width: usize,
    pub height: usize,
    pub r_min: usize,
    pub r_max: usize,
    votes: Vec<u32>,
}

impl Accumulator {
    #[inline]
    pub fn get(&self, u: usize, v: usize, r: usize) -> u32 {
        self.votes[((r - self.r_min) * self.height + v) * self.width + u]
    }

    pub fn confidence(&self, u: usize, v: usize, r: usize) -> f64 {
        self.get(u, v, r) as f64 / (2.0 * PI * r as f64)
    }
}

fn validate(edges: &BinaryImage, r_min: usize, r_max: usize) -> Result<()> {
    if r_min < 3 {
        return Err(Error::invalid("r_min", "must be at least 3 pixels"));
    }
    if r_min > r_max {
        return Err(Error::invalid("r_max", "must not be below r_min"));
    }
    if r_max > edges.width().min(edges.height()) / 2 {
        return Err(Error::invalid("r_max", "must not exceed half the smaller image side"));
    }
    Ok(())
}

/// Fills the accumulator. Radii are independent slices, so the result does
/// not depend on the order in which they are processed.
pub fn accumulate(edges: &BinaryImage, r_min: usize, r_max: usize) -> Result<Accumulator> {
    validate(edges, r_min, r_max)?;
    let (w, h) = (edges.width(), edges.height());
    let n_r = r_max - r_min + 1;
    let mut votes = vec![0u32; n_r * w * h];
    let points: Vec<(i64, i64)> = edges.set_pixels().map(|(c, r)| (c as i64, r as i64)).collect();
    for (ri, slice) in votes.chunks_mut(w * h).enumerate() {
        let offs = circle_offsets(r_min + ri);
        for &(pc, pr) in &points {
            for &(dc, dr) in &offs {
                let (u, v) = (pc - dc, pr - dr);
                if u >= 0 && v >= 0 && (u as usize) < w && (v as usize) < h {
                    slice[v as usize * w + u as usize] += 1;
                }
            }
        }
    }
    Ok(Accumulator { width: w, height: h, r_min, r_max, votes })
}

fn is_peak(acc: &Accumulator, u: usize, v: usize, r: usize) -> bool {
    let here = acc.get(u, v, r);
    let here_key = (r, v, u);
    for rr in r.saturating_sub(1).max(acc.r_min)..=(r + 1).min(acc.r_max) {
        for vv in v.saturating_sub(1)..=(v + 1).min(acc.height - 1) {
            for uu in u.saturating_sub(1)..=(u + 1).min(acc.width - 1) {
                if (rr, vv, uu) == here_key {
                    continue;
                }
                let other = acc.get(uu, vv, rr);
                // Plateaus are credited to their first cell in scan order.
                if other > here || (other == here && (rr, vv, uu) < here_key) {
                    return false;
                }
            }
        }
    }
    true
}

fn refine_peak(acc: &Accumulator, u: usize, v: usize, r: usize) -> ScoredCircle {
    let (mut su, mut sv, mut sw) = (0.0, 0.0, 0.0);
    for vv in v.saturating_sub(1)..=(v + 1).min(acc.height - 1) {
        for uu in u.saturating_sub(1)..=(u + 1).min(acc.width - 1) {
            let w = acc.get(uu, vv, r) as f64;
            su += w * uu as f64;
            sv += w * vv as f64;
            sw += w;
        }
    }
    let (mut sr, mut swr) = (0.0, 0.0);
    for rr in r.saturating_sub(1).max(acc.r_min)..=(r + 1).min(acc.r_max) {
        let c = acc.confidence(u, v, rr);
        sr += c * rr as f64;
        swr += c;
    }
    let votes = acc.get(u, v, r);
    ScoredCircle {
        center: (su / sw, sv / sw),
        radius: sr / swr,
        votes,
        confidence: votes as f64 / (2.0 * PI * r as f64),
    }
}

/// Local accumulator maxima with confidence at least `min_confidence`,
/// sorted by confidence (descending). Circles whose centers lie within
/// [`DUPLICATE_RADIUS_PX`] of a better circle are dropped.
pub fn hough_circles(edges: &BinaryImage, r_min: usize, r_max: usize, min_confidence: f64) -> Result<Vec<ScoredCircle>> {
    let acc = accumulate(edges, r_min, r_max)?;
    let mut found = Vec::new();
    for r in r_min..=r_max {
        let floor = min_confidence * 2.0 * PI * r as f64;
        for v in 0..acc.height {
            for u in 0..acc.width {
                let votes = acc.get(u, v, r);
                if votes == 0 || (votes as f64) < floor {
                    continue;
                }
                if is_peak(&acc, u, v, r) {
                    found.push(refine_peak(&acc, u, v, r));
                }
            }
        }
    }
    found.sort_by(|a, b| {
        b.confidence.total_cmp(&a.confidence).then(b.votes.cmp(&a.votes)).then(a.total_cmp(b))
    });
    let mut kept: Vec<ScoredCircle> = Vec::new();
    for c in found {
        if kept.iter().all(|k| k.distance(&c) > DUPLICATE_RADIUS_PX) {
            kept.push(c);
        }
    }
    Ok(kept)
}

/// Plausible eye pair in one projection; `left` has the smaller world x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyePair2D {
    pub left: ScoredCircle,
    pub right: ScoredCircle,
    pub projection: AxisPair,
}

/// Geometric plausibility limits for a candidate eye pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairRules {
    /// Largest angle between the eye line and the image x axis, in degrees.
    pub max_tilt_deg: f64,
    /// Smallest allowed ratio of the smaller to the larger radius.
    pub min_radius_ratio: f64,
}

impl PairRules {
    /// Accepts every pair inside the distance band.
    pub const ANY: PairRules = PairRules { max_tilt_deg: 90.0, min_radius_ratio: 0.0 };

    fn admits(&self, a: &ScoredCircle, b: &ScoredCircle, axis: AxisPair) -> bool {
        let (ra, rb) = (a.radius.min(b.radius), a.radius.max(b.radius));
        if ra < self.min_radius_ratio * rb {
            return false;
        }
        if self.max_tilt_deg >= 90.0 {
            return true;
        }
        let dx = libm::fabs(a.x_coord(axis) - b.x_coord(axis));
        let other = |c: &ScoredCircle| if axis.x_is_u() { c.center.1 } else { c.center.0 };
        let dy = libm::fabs(other(a) - other(b));
        dy <= dx * libm::tan(self.max_tilt_deg.to_radians())
    }
}

impl Default for PairRules {
    fn default() -> Self {
        PairRules { max_tilt_deg: 35.0, min_radius_ratio: 0.6 }
    }
}

/// Picks the pair of circles with the highest summed confidence among
/// pairs whose center distance lies in `[d_min, d_max]` pixels. Ties go to
/// the pair with more similar radii, then to the one whose left eye is
/// further left.
pub fn select_eye_pair(circles: &[ScoredCircle], d_min: f64, d_max: f64, projection: AxisPair) -> Result<EyePair2D> {
    rank_eye_pairs(circles, d_min, d_max, projection, &PairRules::ANY, 1)?
        .into_iter()
        .next()
        .ok_or(Error::EyesNotFound)
}

/// Up to `limit` admissible pairs, best first, in the order used by
/// [`select_eye_pair`].
pub fn rank_eye_pairs(
    circles: &[ScoredCircle],
    d_min: f64,
    d_max: f64,
    projection: AxisPair,
    rules: &PairRules,
    limit: usize,
) -> Result<Vec<EyePair2D>> {
    if !(d_min < d_max) {
        return Err(Error::invalid("d_min", "distance band must satisfy d_min < d_max"));
    }
    let order = |a: &ScoredCircle, b: &ScoredCircle| -> (ScoredCircle, ScoredCircle) {
        let (xa, xb) = (a.x_coord(projection), b.x_coord(projection));
        match xa.total_cmp(&xb).then_with(|| a.total_cmp(b)) {
            Ordering::Greater => (*b, *a),
            _ => (*a, *b),
        }
    };
    let mut pairs = Vec::new();
    for i in 0..circles.len() {
        for j in i + 1..circles.len() {
            let d = circles[i].distance(&circles[j]);
            if d < d_min || d > d_max || !rules.admits(&circles[i], &circles[j], projection) {
                continue;
            }
            pairs.push(order(&circles[i], &circles[j]));
        }
    }
    pairs.sort_by(|a, b| pair_cmp(a, b, projection));
    pairs.truncate(limit);
    Ok(pairs.into_iter().map(|(left, right)| EyePair2D { left, right, projection }).collect())
}

/// `Less` means `a` is the better pair.
fn pair_cmp(a: &(ScoredCircle, ScoredCircle), b: &(ScoredCircle, ScoredCircle), axis: AxisPair) -> Ordering {
    let score = |p: &(ScoredCircle, ScoredCircle)| p.0.confidence + p.1.confidence;
    let dr = |p: &(ScoredCircle, ScoredCircle)| libm::fabs(p.0.radius - p.1.radius);
    score(b)
        .total_cmp(&score(a))
        .then(dr(a).total_cmp(&dr(b)))
        .then(a.0.x_coord(axis).total_cmp(&b.0.x_coord(axis)))
        .then(a.0.total_cmp(&b.0))
        .then(a.1.total_cmp(&b.1))
}

/// Pixel-space correction applied to detected circles before matching.
/// Top-left anchored morphology translates shapes by half the kernel
/// footprint and grows (dilation) or shrinks (erosion) them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelCorrection {
    pub du: f64,
    pub dv: f64,
    pub dr: f64,
}

impl PixelCorrection {
    pub fn apply(&self, c: &ScoredCircle) -> ScoredCircle {
        ScoredCircle {
            center: (c.center.0 + self.du, c.center.1 + self.dv),
            radius: (c.radius + self.dr).max(f64::MIN_POSITIVE),
            ..*c
        }
    }
}

/// World position of one detected eye in one projection.
#[derive(Debug, Clone, Copy)]
struct WorldEye {
    x: f64,
    other: f64,
}

fn to_world(c: &ScoredCircle, t: &RasterTransform) -> WorldEye {
    let (wu, wv) = t.to_world(c.center.0, c.center.1);
    match t.axis_pair {
        AxisPair::XY => WorldEye { x: wu, other: wv },
        AxisPair::ZX => WorldEye { x: wv, other: wu },
    }
}

/// Combines the x-y and z-x eye pairs into 3D eye centers. Each z-x eye is
/// paired with the x-y eye closest in world x; x and y come from the x-y
/// projection and z from the z-x projection. `x_tolerance_mm` defaults to
/// three x-y pixels.
pub fn match_projections(
    xy: &EyePair2D,
    zx: &EyePair2D,
    xy_t: &RasterTransform,
    zx_t: &RasterTransform,
    x_tolerance_mm: Option<f64>,
) -> Result<EyePair3D> {
    if xy_t.axis_pair != AxisPair::XY || zx_t.axis_pair != AxisPair::ZX {
        return Err(Error::invalid("transform", "expected x-y and z-x projections"));
    }
    let tolerance = x_tolerance_mm.unwrap_or(3.0 * xy_t.scale);
    let xy_eyes = [to_world(&xy.left, xy_t), to_world(&xy.right, xy_t)];
    let zx_circles = [zx.left, zx.right];
    let zx_eyes = [to_world(&zx.left, zx_t), to_world(&zx.right, zx_t)];

    let nearest = |e: &WorldEye| -> usize {
        let d0 = libm::fabs(e.x - xy_eyes[0].x);
        let d1 = libm::fabs(e.x - xy_eyes[1].x);
        if d1 < d0 {
            1
        } else {
            0
        }
    };
    let m0 = nearest(&zx_eyes[0]);
    let m1 = nearest(&zx_eyes[1]);
    if m0 == m1 {
        return Err(Error::AmbiguousMatch);
    }
    // partner[i] = index of the z-x eye matched to x-y eye i
    let partner = if m0 == 0 { [0, 1] } else { [1, 0] };
    for (i, &j) in partner.iter().enumerate() {
        let dx = libm::fabs(xy_eyes[i].x - zx_eyes[j].x);
        if dx > tolerance {
            return Err(Error::InconsistentX { dx, tolerance });
        }
    }
    let eye = |i: usize| Vec3::new(xy_eyes[i].x, xy_eyes[i].other, zx_eyes[partner[i]].other);
    let confidence = 0.25
        * (xy.left.confidence + xy.right.confidence + zx_circles[0].confidence + zx_circles[1].confidence);
    EyePair3D::new(eye(0), eye(1), xy.left.radius * xy_t.scale, xy.right.radius * xy_t.scale, confidence)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Thin rasterized circle outline.
    pub(crate) fn ring(img: &mut BinaryImage, cx: f64, cy: f64, r: f64) {
        for row in 0..img.height() {
            for col in 0..img.width() {
                let d = ((col as f64 - cx).powi(2) + (row as f64 - cy).powi(2)).sqrt();
                if (d - r).abs() < 0.5 {
                    img.set(col, row, true);
                }
            }
        }
    }

    fn circle(u: f64, v: f64, r: f64, conf: f64) -> ScoredCircle {
        ScoredCircle { center: (u, v), radius: r, votes: 10, confidence: conf }
    }

    #[test]
    fn empty_edge_map_gives_no_circles() {
        let img = BinaryImage::blank(64, 64).unwrap();
        assert!(hough_circles(&img, 4, 16, 0.1).unwrap().is_empty());
    }

    #[test]
    fn parameter_validation() {
        let img = BinaryImage::blank(32, 32).unwrap();
        assert!(hough_circles(&img, 2, 10, 0.1).is_err());
        assert!(hough_circles(&img, 8, 6, 0.1).is_err());
        assert!(hough_circles(&img, 4, 17, 0.1).is_err());
        assert!(hough_circles(&img, 4, 16, 0.1).is_ok());
    }

    #[test]
    fn recovers_single_circle() {
        let mut img = BinaryImage::blank(64, 64).unwrap();
        ring(&mut img, 20.0, 20.0, 10.0);
        let found = hough_circles(&img, 4, 16, 0.3).unwrap();
        let top = found[0];
        assert!((top.center.0 - 20.0).abs() <= 1.0 && (top.center.1 - 20.0).abs() <= 1.0, "{top:?}");
        assert!((top.radius - 10.0).abs() <= 1.0, "{top:?}");
        assert!(top.confidence > 0.7);
    }

    #[test]
    fn recovers_two_circles_above_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut img = BinaryImage::from_fn(64, 64, |_, _| rng.random_bool(0.02)).unwrap();
        ring(&mut img, 16.0, 20.0, 8.0);
        ring(&mut img, 44.0, 20.0, 8.0);
        let found = hough_circles(&img, 4, 16, 0.2).unwrap();
        assert!(found.len() >= 2);
        let mut top: Vec<_> = found[..2].to_vec();
        top.sort_by(|a, b| a.center.0.total_cmp(&b.center.0));
        for (c, want) in top.iter().zip([(16.0, 20.0), (44.0, 20.0)]) {
            assert!((c.center.0 - want.0).abs() <= 1.0 && (c.center.1 - want.1).abs() <= 1.0, "{c:?}");
            assert!((c.radius - 8.0).abs() <= 1.0);
        }
    }

    #[test]
    fn translation_equivariance() {
        let mut a = BinaryImage::blank(64, 64).unwrap();
        ring(&mut a, 25.3, 30.6, 7.0);
        let (du, dv) = (6usize, 4usize);
        let b = BinaryImage::from_fn(64, 64, |c, r| c >= du && r >= dv && a.get(c - du, r - dv)).unwrap();
        let ca = hough_circles(&a, 4, 12, 0.3).unwrap();
        let cb = hough_circles(&b, 4, 12, 0.3).unwrap();
        assert_eq!(ca.len(), cb.len());
        for (x, y) in ca.iter().zip(&cb) {
            assert!((x.center.0 + du as f64 - y.center.0).abs() < 1e-9);
            assert!((x.center.1 + dv as f64 - y.center.1).abs() < 1e-9);
            assert_eq!(x.radius, y.radius);
            assert_eq!(x.votes, y.votes);
        }
    }

    #[test]
    fn top_confidence_dominates_displaced_hypotheses() {
        // Exhaustive scan of the accumulator for a noiseless circle.
        let mut img = BinaryImage::blank(40, 40).unwrap();
        ring(&mut img, 19.0, 21.0, 8.0);
        let acc = accumulate(&img, 4, 14).unwrap();
        let best = hough_circles(&img, 4, 14, 0.0).unwrap()[0];
        let (bu, bv, br) = (libm::round(best.center.0) as i64, libm::round(best.center.1) as i64, 8i64);
        for r in 4..=14usize {
            for v in 0..40usize {
                for u in 0..40usize {
                    let far = (u as i64 - bu).abs() >= 2 || (v as i64 - bv).abs() >= 2 || (r as i64 - br).abs() >= 2;
                    if far {
                        assert!(acc.confidence(u, v, r) <= best.confidence, "({u},{v},{r})");
                    }
                }
            }
        }
    }

    #[test]
    fn pair_selection_forced_choice() {
        let a = circle(40.0, 10.0, 5.0, 0.8);
        let b = circle(10.0, 10.0, 5.0, 0.7);
        let p = select_eye_pair(&[a, b], 20.0, 40.0, AxisPair::XY).unwrap();
        assert_eq!(p.left, b);
        assert_eq!(p.right, a);
    }

    #[test]
    fn pair_selection_empty_input() {
        assert_eq!(select_eye_pair(&[], 10.0, 20.0, AxisPair::XY), Err(Error::EyesNotFound));
        let lone = [circle(1.0, 1.0, 4.0, 1.0)];
        assert_eq!(select_eye_pair(&lone, 10.0, 20.0, AxisPair::XY), Err(Error::EyesNotFound));
        assert!(select_eye_pair(&lone, 20.0, 10.0, AxisPair::XY).is_err());
    }

    /// Exhaustive oracle: scores every pair independently.
    fn brute_pair(cs: &[ScoredCircle], d_min: f64, d_max: f64) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64, f64, f64)> = None; // (score, -dr, -leftx) -> keep max
        for i in 0..cs.len() {
            for j in 0..cs.len() {
                if i == j || cs[i].center.0 > cs[j].center.0 {
                    continue;
                }
                let d = ((cs[i].center.0 - cs[j].center.0).powi(2) + (cs[i].center.1 - cs[j].center.1).powi(2)).sqrt();
                if d < d_min || d > d_max {
                    continue;
                }
                let key = (cs[i].confidence + cs[j].confidence, -(cs[i].radius - cs[j].radius).abs(), -cs[i].center.0);
                if best.is_none_or(|b| (key.0, key.1, key.2) > (b.0, b.1, b.2)) {
                    best = Some((key.0, key.1, key.2, cs[j].center.0));
                }
            }
        }
        best.map(|b| (-b.2, b.3))
    }

    #[test]
    fn pair_selection_matches_exhaustive_oracle() {
        // Only the first two circles are 25 px apart; the third is far from both.
        let cs = [circle(10.0, 10.0, 5.0, 0.5), circle(35.0, 10.0, 6.0, 0.4), circle(90.0, 60.0, 5.0, 0.99)];
        let p = select_eye_pair(&cs, 20.0, 30.0, AxisPair::XY).unwrap();
        assert_eq!(brute_pair(&cs, 20.0, 30.0), Some((p.left.center.0, p.right.center.0)));
        assert_eq!((p.left.center.0, p.right.center.0), (10.0, 35.0));

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let n = rng.random_range(2..8);
            let cs: Vec<ScoredCircle> = (0..n)
                .map(|_| {
                    circle(
                        rng.random_range(0.0..100.0),
                        rng.random_range(0.0..100.0),
                        rng.random_range(4.0..12.0),
                        rng.random_range(0.1..1.0),
                    )
                })
                .collect();
            let got = select_eye_pair(&cs, 20.0, 50.0, AxisPair::XY).ok().map(|p| (p.left.center.0, p.right.center.0));
            assert_eq!(got, brute_pair(&cs, 20.0, 50.0));
        }
    }

    #[test]
    fn pair_selection_is_order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let mut cs: Vec<ScoredCircle> = (0..6)
                .map(|_| circle(rng.random_range(0.0..60.0), rng.random_range(0.0..60.0), 5.0, (rng.random_range(1..5) as f64) / 4.0))
                .collect();
            let a = select_eye_pair(&cs, 10.0, 40.0, AxisPair::ZX);
            cs.reverse();
            cs.rotate_left(2);
            assert_eq!(a, select_eye_pair(&cs, 10.0, 40.0, AxisPair::ZX));
        }
    }

    #[test]
    fn zx_pairs_are_ordered_by_v() {
        let a = circle(30.0, 50.0, 5.0, 0.8);
        let b = circle(31.0, 20.0, 5.0, 0.8);
        let p = select_eye_pair(&[a, b], 20.0, 40.0, AxisPair::ZX).unwrap();
        assert_eq!(p.left, b);
    }

    #[test]
    fn pair_rules_reject_steep_and_mismatched_pairs() {
        let rules = PairRules::default();
        let a = circle(10.0, 10.0, 6.0, 0.9);
        let steep = circle(20.0, 40.0, 6.0, 0.95);
        let small = circle(40.0, 12.0, 3.0, 0.95);
        let good = circle(40.0, 14.0, 5.5, 0.5);
        let ranked = rank_eye_pairs(&[a, steep, small, good], 20.0, 40.0, AxisPair::XY, &rules, 8).unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!((ranked[0].left, ranked[0].right), (a, good));
        let any = rank_eye_pairs(&[a, steep, small, good], 20.0, 40.0, AxisPair::XY, &PairRules::ANY, 8).unwrap();
        assert!(any.len() > 1);
        assert_eq!(any[0], select_eye_pair(&[a, steep, small, good], 20.0, 40.0, AxisPair::XY).unwrap());
    }

    #[test]
    fn ranking_is_sorted_and_truncated() {
        let cs: Vec<_> = (0..6).map(|i| circle(10.0 * i as f64, 0.0, 5.0, 0.3 + 0.1 * i as f64)).collect();
        let ranked = rank_eye_pairs(&cs, 5.0, 100.0, AxisPair::XY, &PairRules::default(), 4).unwrap();
        assert_eq!(ranked.len(), 4);
        let score = |p: &EyePair2D| p.left.confidence + p.right.confidence;
        assert!(ranked.windows(2).all(|w| score(&w[0]) >= score(&w[1])));
    }

    fn xy_pair_at(x_left: f64, x_right: f64) -> (EyePair2D, RasterTransform) {
        let t = RasterTransform::identity(AxisPair::XY);
        let l = circle(x_left - 0.5, 9.5, 5.0, 0.9);
        let r = circle(x_right - 0.5, 9.5, 5.0, 0.9);
        (EyePair2D { left: l, right: r, projection: AxisPair::XY }, t)
    }

    fn zx_pair_at(x_a: f64, x_b: f64, z: f64) -> (EyePair2D, RasterTransform) {
        let t = RasterTransform::identity(AxisPair::ZX);
        let a = circle(z - 0.5, x_a - 0.5, 5.0, 0.9);
        let b = circle(z - 0.5, x_b - 0.5, 5.0, 0.9);
        (EyePair2D { left: a, right: b, projection: AxisPair::ZX }, t)
    }

    #[test]
    fn matching_pairs_nearest_x() {
        let (xy, xt) = xy_pair_at(-30.0, 30.0);
        let (zx, zt) = zx_pair_at(31.0, -29.0, 70.0);
        let e = match_projections(&xy, &zx, &xt, &zt, None).unwrap();
        assert_eq!(e.left, Vec3::new(-30.0, 10.0, 70.0));
        assert_eq!(e.right, Vec3::new(30.0, 10.0, 70.0));
        assert_eq!(e.radius_left, 5.0);
    }

    #[test]
    fn matching_degenerate_is_ambiguous() {
        let (xy, xt) = xy_pair_at(-30.0, 30.0);
        let (zx, zt) = zx_pair_at(0.0, 0.0, 70.0);
        assert_eq!(match_projections(&xy, &zx, &xt, &zt, None), Err(Error::AmbiguousMatch));
    }

    #[test]
    fn matching_rejects_inconsistent_x() {
        let (xy, xt) = xy_pair_at(-30.0, 30.0);
        let (zx, zt) = zx_pair_at(-20.0, 30.0, 70.0);
        assert!(matches!(match_projections(&xy, &zx, &xt, &zt, None), Err(Error::InconsistentX { .. })));
        assert!(match_projections(&xy, &zx, &xt, &zt, Some(11.0)).is_ok());
    }
}
