//! Binary projections of pointclouds and the image operations applied to
//! them before circle detection.

mod canny;

pub use canny::{canny, gaussian_blur, sobel, CannyParams, GradientField};

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bounding_box, PointCloud, Vec3};

/// Smallest accepted image side, in pixels.
pub const MIN_SIDE: usize = 8;

/// Margin left on every side by [`project`], in pixels.
pub const MARGIN_PX: usize = 2;

/// Which pair of world axes an image spans, as `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AxisPair {
    /// `u = x`, `v = y`.
    XY,
    /// `u = z`, `v = x`.
    ZX,
}

impl AxisPair {
    /// World coordinates `(u, v)` of a point in this projection.
    #[inline]
    pub fn project(self, p: Vec3) -> (f64, f64) {
        match self {
            AxisPair::XY => (p.x, p.y),
            AxisPair::ZX => (p.z, p.x),
        }
    }

    /// True when the world x axis runs along image `u`.
    pub fn x_is_u(self) -> bool {
        matches!(self, AxisPair::XY)
    }

    pub fn name(self) -> &'static str {
        match self {
            AxisPair::XY => "xy",
            AxisPair::ZX => "zx",
        }
    }
}

/// Maps world millimeters to pixel indices along one axis pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterTransform {
    pub axis_pair: AxisPair,
    /// World `(u, v)` of the outer corner of pixel `(0, 0)`.
    pub origin_world: (f64, f64),
    /// Millimeters per pixel.
    pub scale: f64,
}

impl RasterTransform {
    pub fn new(axis_pair: AxisPair, origin_world: (f64, f64), scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("scale", "must be positive and finite"));
        }
        Ok(RasterTransform { axis_pair, origin_world, scale })
    }

    /// One millimeter per pixel with the origin at pixel `(0, 0)`.
    pub fn identity(axis_pair: AxisPair) -> Self {
        RasterTransform { axis_pair, origin_world: (0.0, 0.0), scale: 1.0 }
    }

    /// Continuous pixel coordinates of a world `(u, v)`.
    #[inline]
    pub fn to_pixel_f(&self, u: f64, v: f64) -> (f64, f64) {
        ((u - self.origin_world.0) / self.scale, (v - self.origin_world.1) / self.scale)
    }

    /// Pixel cell `(col, row)` containing world `(u, v)`, if any.
    pub fn to_pixel(&self, u: f64, v: f64) -> (i64, i64) {
        let (fu, fv) = self.to_pixel_f(u, v);
        (libm::floor(fu) as i64, libm::floor(fv) as i64)
    }

    /// World `(u, v)` of a continuous pixel position, where integer values
    /// name pixel centers.
    #[inline]
    pub fn to_world(&self, col: f64, row: f64) -> (f64, f64) {
        (
            self.origin_world.0 + (col + 0.5) * self.scale,
            self.origin_world.1 + (row + 0.5) * self.scale,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
    transform: RasterTransform,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, transform: RasterTransform) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::invalid("resolution", "image sides must be at least 8 pixels"));
        }
        Ok(BinaryImage { width, height, pixels: vec![false; width * height], transform })
    }

    /// Blank image with an identity transform, for synthetic inputs.
    pub fn blank(width: usize, height: usize) -> Result<Self> {
        BinaryImage::new(width, height, RasterTransform::identity(AxisPair::XY))
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut img = BinaryImage::blank(width, height)?;
        for row in 0..height {
            for col in 0..width {
                img.pixels[row * width + col] = f(col, row);
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn transform(&self) -> &RasterTransform {
        &self.transform
    }

    pub fn with_transform(mut self, t: RasterTransform) -> Self {
        self.transform = t;
        self
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.pixels[row * self.width + col]
    }

    /// Out-of-range coordinates read as unset.
    #[inline]
    pub fn get_signed(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height && self.get(col as usize, row as usize)
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        self.pixels[row * self.width + col] = value;
    }

    /// Row-major pixel values.
    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn count_set(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    /// `(col, row)` of every set pixel in row-major order.
    pub fn set_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pixels.iter().enumerate().filter(|(_, &p)| p).map(move |(i, _)| (i % self.width, i / self.width))
    }

    pub fn inverted(&self) -> BinaryImage {
        BinaryImage { pixels: self.pixels.iter().map(|p| !p).collect(), ..self.clone() }
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.pixels.len() == other.pixels.len() && self.pixels.iter().zip(&other.pixels).all(|(&a, &b)| !a || b)
    }

    /// 0/1 intensities as floats.
    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect()
    }
}

/// Rasterizes the cloud onto a `resolution` x `resolution` image along
/// `axis_pair`. The transform fits the bounding box with a uniform scale and
/// a two-pixel margin; a cloud whose points all coincide gets 1 mm per pixel.
pub fn project(cloud: &PointCloud, axis_pair: AxisPair, resolution: usize) -> Result<BinaryImage> {
    if resolution < MIN_SIDE {
        return Err(Error::invalid("resolution", "must be at least 8 pixels"));
    }
    let bbox = bounding_box(cloud)?;
    let (u_lo, v_lo) = axis_pair.project(bbox.min);
    let (u_hi, v_hi) = axis_pair.project(bbox.max);
    let extent = (u_hi - u_lo).max(v_hi - v_lo);
    let magnitude = [u_lo, u_hi, v_lo, v_hi].iter().fold(1.0f64, |m, c| m.max(libm::fabs(*c)));
    let scale = if extent == 0.0 {
        1.0
    } else if extent < 10.0 * f64::EPSILON * magnitude {
        return Err(Error::DegenerateExtent);
    } else {
        extent / (resolution - 2 * MARGIN_PX) as f64
    };
    let center = (0.5 * (u_lo + u_hi), 0.5 * (v_lo + v_hi));
    let half = 0.5 * resolution as f64 * scale;
    let transform = RasterTransform::new(axis_pair, (center.0 - half, center.1 - half), scale)?;

    let mut img = BinaryImage::new(resolution, resolution, transform)?;
    let last = resolution as i64 - 1;
    for &p in cloud.points() {
        let (u, v) = axis_pair.project(p);
        let (col, row) = transform.to_pixel(u, v);
        img.set(col.clamp(0, last) as usize, row.clamp(0, last) as usize, true);
    }
    Ok(img)
}

/// Binary dilation with an all-ones `h x w` structuring element anchored at
/// its top-left cell: every set pixel `(c, r)` sets `(c + dc, r + dr)` for
/// `dc < w`, `dr < h`. Pixels pushed past the border are dropped.
pub fn dilate(img: &BinaryImage, kernel: (usize, usize)) -> Result<BinaryImage> {
    let (kh, kw) = kernel;
    if kh == 0 || kw == 0 {
        return Err(Error::invalid("kernel", "dimensions must be at least 1"));
    }
    let (w, h) = (img.width, img.height);
    // Separable: a row sweep of width kw followed by a column sweep of height kh.
    let mut horiz = vec![false; w * h];
    for row in 0..h {
        let src = &img.pixels[row * w..(row + 1) * w];
        let dst = &mut horiz[row * w..(row + 1) * w];
        let mut run_left = 0usize;
        for col in 0..w {
            if src[col] {
                run_left = kw;
            }
            if run_left > 0 {
                dst[col] = true;
                run_left -= 1;
            }
        }
    }
    let mut out = img.clone();
    for col in 0..w {
        let mut run_left = 0usize;
        for row in 0..h {
            if horiz[row * w + col] {
                run_left = kh;
            }
            out.pixels[row * w + col] = run_left > 0;
            run_left = run_left.saturating_sub(1);
        }
    }
    Ok(out)
}

/// Dilation of the unset pixels: a set pixel survives only when the whole
/// kernel footprint reaching up and left from it is set.
pub fn dilate_background(img: &BinaryImage, kernel: (usize, usize)) -> Result<BinaryImage> {
    Ok(dilate(&img.inverted(), kernel)?.inverted())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(pts: &[(f64, f64, f64)]) -> PointCloud {
        PointCloud::new(pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect()).unwrap()
    }

    pub(crate) fn brute_dilate(img: &BinaryImage, kh: usize, kw: usize) -> BinaryImage {
        let mut out = img.clone();
        for row in 0..img.height() {
            for col in 0..img.width() {
                let mut any = false;
                for dr in 0..kh {
                    for dc in 0..kw {
                        if row >= dr && col >= dc && img.get(col - dc, row - dr) {
                            any = true;
                        }
                    }
                }
                out.set(col, row, any);
            }
        }
        out
    }

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> BinaryImage {
        BinaryImage::from_fn(w, h, |_, _| rng.random_bool(density)).unwrap()
    }

    #[test]
    fn single_point_lands_in_center() {
        let img = project(&cloud(&[(0.0, 0.0, 0.0)]), AxisPair::XY, 16).unwrap();
        assert_eq!(img.count_set(), 1);
        let (c, r) = img.set_pixels().next().unwrap();
        assert_eq!((c, r), (8, 8));
    }

    #[test]
    fn collinear_pair_shares_a_row() {
        let img = project(&cloud(&[(0.0, 0.0, 0.0), (10.0, 0.0, 0.0)]), AxisPair::XY, 16).unwrap();
        let set: Vec<_> = img.set_pixels().collect();
        assert_eq!(set.len(), 2);
        assert_eq!(set[0].1, set[1].1);
        let t = img.transform();
        let (c0, _) = t.to_pixel(0.0, 0.0);
        let (c1, _) = t.to_pixel(10.0, 0.0);
        assert!(c0 < c1);
        assert_eq!(c0 as usize, set[0].0);
        assert_eq!(c1 as usize, set[1].0);
    }

    #[test]
    fn project_errors() {
        assert_eq!(project(&PointCloud::default(), AxisPair::XY, 16), Err(Error::EmptyCloud));
        assert!(project(&cloud(&[(0.0, 0.0, 0.0)]), AxisPair::XY, 7).is_err());
        let tiny = cloud(&[(1.0, 1.0, 0.0), (1.0 + 2.0 * f64::EPSILON, 1.0, 0.0)]);
        assert_eq!(project(&tiny, AxisPair::XY, 16), Err(Error::DegenerateExtent));
    }

    #[test]
    fn zx_maps_z_to_u_and_x_to_v() {
        let img = project(&cloud(&[(0.0, 0.0, 0.0), (0.0, 0.0, 10.0)]), AxisPair::ZX, 16).unwrap();
        let set: Vec<_> = img.set_pixels().collect();
        assert_eq!(set[0].1, set[1].1, "z offset moves along columns");
    }

    #[test]
    fn sphere_projects_to_disc() {
        // Projection of a uniformly sampled sphere of radius 50 mm.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec3> = (0..1000)
            .map(|_| {
                let z: f64 = rng.random_range(-1.0..1.0);
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                let s = (1.0 - z * z).sqrt();
                Vec3::new(50.0 * s * phi.cos(), 50.0 * s * phi.sin(), 50.0 * z)
            })
            .collect();
        let c = PointCloud::new(pts.clone()).unwrap();
        let img = project(&c, AxisPair::XY, 128).unwrap();
        let t = *img.transform();

        // Per-pixel membership oracle: a pixel is set iff some point's
        // world coordinates fall inside its cell. Points within rounding
        // distance of a cell border may land on either side.
        let tol = 1e-9 * t.scale;
        for row in 0..128 {
            for col in 0..128 {
                let (u0, v0) = (t.origin_world.0 + col as f64 * t.scale, t.origin_world.1 + row as f64 * t.scale);
                let inside = |p: &Vec3, pad: f64| {
                    p.x >= u0 - pad && p.x < u0 + t.scale + pad && p.y >= v0 - pad && p.y < v0 + t.scale + pad
                };
                if pts.iter().any(|p| inside(p, -tol)) {
                    assert!(img.get(col, row), "pixel ({col},{row}) should be set");
                }
                if img.get(col, row) {
                    assert!(pts.iter().any(|p| inside(p, tol)), "pixel ({col},{row}) should be clear");
                }
            }
        }

        // The 1000 points cover the bulk of the disc area.
        let r_px = 50.0 / t.scale;
        let disc = PI * r_px * r_px;
        let n = img.count_set() as f64;
        assert!(n <= disc * 1.1, "{n} set pixels vs disc area {disc}");
        assert!(n >= disc * 0.05);
    }

    #[test]
    fn transform_round_trip_within_half_pixel() {
        let t = RasterTransform::new(AxisPair::XY, (-12.5, 3.0), 0.75).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let (u, v) = (rng.random_range(-12.0..80.0), rng.random_range(3.5..90.0));
            let (c, r) = t.to_pixel(u, v);
            let (wu, wv) = t.to_world(c as f64, r as f64);
            assert!((wu - u).abs() <= t.scale / 2.0 + 1e-12);
            assert!((wv - v).abs() <= t.scale / 2.0 + 1e-12);
        }
        assert!(RasterTransform::new(AxisPair::XY, (0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn dilate_empty_is_empty() {
        let img = BinaryImage::blank(16, 16).unwrap();
        assert_eq!(dilate(&img, (3, 4)).unwrap().count_set(), 0);
    }

    #[test]
    fn dilate_unit_impulse() {
        let mut img = BinaryImage::blank(16, 16).unwrap();
        img.set(5, 5, true);
        let out = dilate(&img, (1, 2)).unwrap();
        let set: Vec<_> = out.set_pixels().collect();
        assert_eq!(set, [(5, 5), (6, 5)]);
    }

    #[test]
    fn dilate_rejects_zero_kernel() {
        let img = BinaryImage::blank(16, 16).unwrap();
        assert!(dilate(&img, (0, 2)).is_err());
        assert!(dilate(&img, (2, 0)).is_err());
    }

    #[test]
    fn dilate_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let img = random_image(&mut rng, 32, 32, 0.1);
        assert_eq!(dilate(&img, (2, 5)).unwrap(), brute_dilate(&img, 2, 5));
    }

    #[test]
    fn dilation_composes_away_from_borders() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut img = random_image(&mut rng, 40, 40, 0.05);
        // Keep the right border clear so nothing is clipped.
        for row in 0..40 {
            for col in 34..40 {
                img.set(col, row, false);
            }
        }
        let twice = dilate(&dilate(&img, (1, 2)).unwrap(), (1, 2)).unwrap();
        assert_eq!(twice, dilate(&img, (1, 3)).unwrap());
    }

    #[test]
    fn background_dilation_erodes_foreground() {
        let img = BinaryImage::from_fn(16, 16, |c, r| (3..10).contains(&c) && (4..8).contains(&r)).unwrap();
        let out = dilate_background(&img, (2, 5)).unwrap();
        assert!(out.is_subset_of(&img));
        let set: Vec<_> = out.set_pixels().collect();
        // Columns 7..10 survive (7 - 4 = 3), rows 5..8 survive.
        assert_eq!(set.len(), 3 * 3);
        assert!(set.iter().all(|&(c, r)| (7..10).contains(&c) && (5..8).contains(&r)));
        // An isolated pixel disappears.
        let mut speck = BinaryImage::blank(16, 16).unwrap();
        speck.set(8, 8, true);
        assert_eq!(dilate_background(&speck, (2, 5)).unwrap().count_set(), 0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn image() -> impl Strategy<Value = BinaryImage> {
            proptest::collection::vec(proptest::bool::weighted(0.15), 24 * 24)
                .prop_map(|bits| BinaryImage::from_fn(24, 24, |c, r| bits[r * 24 + c]).unwrap())
        }

        proptest! {
            #[test]
            fn dilation_is_extensive_and_increasing(a in image(), b in image(), kh in 1usize..4, kw in 1usize..6) {
                let k = (kh, kw);
                let da = dilate(&a, k).unwrap();
                prop_assert!(a.is_subset_of(&da));
                // a ∩ b ⊆ a  ⇒  D(a ∩ b) ⊆ D(a)
                let inter = BinaryImage::from_fn(24, 24, |c, r| a.get(c, r) && b.get(c, r)).unwrap();
                prop_assert!(dilate(&inter, k).unwrap().is_subset_of(&da));
            }

            #[test]
            fn dilation_commutes_with_translation(a in image(), dc in 0usize..4, dr in 0usize..4) {
                // Clear a band so neither the shift nor the kernel reaches the border.
                let border = |c: usize, r: usize| c < 6 || r < 6 || c >= 14 || r >= 14;
                let a = BinaryImage::from_fn(24, 24, |c, r| !border(c, r) && a.get(c, r)).unwrap();
                let shifted = BinaryImage::from_fn(24, 24, |c, r| c >= dc && r >= dr && a.get(c - dc, r - dr)).unwrap();
                let d = dilate(&a, (2, 3)).unwrap();
                let d_shifted = BinaryImage::from_fn(24, 24, |c, r| c >= dc && r >= dr && d.get(c - dc, r - dr)).unwrap();
                prop_assert_eq!(dilate(&shifted, (2, 3)).unwrap(), d_shifted);
            }

            #[test]
            fn projection_ignores_point_order(seed in 0u64..1000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut pts: Vec<Vec3> = (0..60)
                    .map(|_| Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
                    .collect();
                let a = project(&PointCloud::new(pts.clone()).unwrap(), AxisPair::ZX, 32).unwrap();
                pts.reverse();
                pts.rotate_left(seed as usize % 60);
                let b = project(&PointCloud::new(pts).unwrap(), AxisPair::ZX, 32).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
