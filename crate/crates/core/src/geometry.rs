//! Points, clouds and planes in head-centered millimeter coordinates.
//!
//! Convention: the origin sits at the center of the head, `+x` points to the
//! subject's right as seen by a viewer facing them, `+y` points up and `+z`
//! points out of the face.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    #[inline]
    pub fn dist_sq(self, o: Vec3) -> f64 {
        (self - o).norm_sq()
    }

    /// Unit vector, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 1e-300 && n.is_finite()).then(|| self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Row-major 3x3 matrix, used for rigid rotations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn rot_x(rad: f64) -> Mat3 {
        let (s, c) = libm::sincos(rad);
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rot_y(rad: f64) -> Mat3 {
        let (s, c) = libm::sincos(rad);
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_z(rad: f64) -> Mat3 {
        let (s, c) = libm::sincos(rad);
        Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Head pose: yaw about `y`, pitch about `x`, roll about `z`, all in
    /// degrees, composed as `R_yaw * R_pitch * R_roll`.
    pub fn from_pose_deg(yaw: f64, pitch: f64, roll: f64) -> Mat3 {
        let d = core::f64::consts::PI / 180.0;
        Mat3::rot_y(yaw * d) * Mat3::rot_x(pitch * d) * Mat3::rot_z(roll * d)
    }

    pub fn transpose(self) -> Mat3 {
        let m = self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(r)
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }
}

/// Ground-truth anatomical region of a synthetic point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Face,
    Skull,
    Neck,
}

impl Region {
    pub fn is_face(self) -> bool {
        self == Region::Face
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Vec3>,
    tags: Option<Vec<Region>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid("points", alloc::format!("point {i} is not finite")));
        }
        Ok(PointCloud { points, tags: None })
    }

    pub fn with_tags(points: Vec<Vec3>, tags: Vec<Region>) -> Result<Self> {
        if tags.len() != points.len() {
            return Err(Error::invalid("tags", "tag count differs from point count"));
        }
        let mut c = PointCloud::new(points)?;
        c.tags = Some(tags);
        Ok(c)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn tags(&self) -> Option<&[Region]> {
        self.tags.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_parts(self) -> (Vec<Vec3>, Option<Vec<Region>>) {
        (self.points, self.tags)
    }

    pub fn drop_tags(mut self) -> Self {
        self.tags = None;
        self
    }

    /// Keeps the points at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            tags: self.tags.as_ref().map(|t| indices.iter().map(|&i| t[i]).collect()),
        }
    }

    /// Keeps the points for which `keep` holds; order is preserved.
    pub fn retain_where(&self, mut keep: impl FnMut(Vec3) -> bool) -> PointCloud {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.points[i])).collect();
        self.select(&idx)
    }

    pub fn map(&self, f: impl Fn(Vec3) -> Vec3) -> PointCloud {
        PointCloud { points: self.points.iter().map(|&p| f(p)).collect(), tags: self.tags.clone() }
    }

    pub fn rotated(&self, r: Mat3) -> PointCloud {
        self.map(|p| r * p)
    }

    pub fn translated(&self, t: Vec3) -> PointCloud {
        self.map(|p| p + t)
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.is_empty() {
            return None;
        }
        let s = self.points.iter().fold(Vec3::ZERO, |a, &p| a + p);
        Some(s / self.len() as f64)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

pub fn bounding_box(cloud: &PointCloud) -> Result<Aabb> {
    let (first, rest) = cloud.points().split_first().ok_or(Error::EmptyCloud)?;
    let (min, max) = rest.iter().fold((*first, *first), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    Ok(Aabb { min, max })
}

/// Oriented plane `A x + B y + C z + D = 0` with unit normal `(A, B, C)`.
/// Points with strictly positive signed distance are on the face side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropPlane {
    normal: Vec3,
    offset: f64,
}

impl CropPlane {
    /// Fails unless `normal` has unit length within `1e-9`.
    pub fn new(normal: Vec3, offset: f64) -> Result<Self> {
        if !normal.is_finite() || !offset.is_finite() || libm::fabs(normal.norm() - 1.0) > 1e-9 {
            return Err(Error::invalid("normal", "crop plane normal must be a finite unit vector"));
        }
        Ok(CropPlane { normal, offset })
    }

    /// Plane through `point` with the given (not necessarily unit) normal.
    pub fn through_point(normal: Vec3, point: Vec3) -> Result<Self> {
        let n = normal.normalized().ok_or(Error::DegenerateGeometry("zero plane normal"))?;
        CropPlane::new(n, -n.dot(point))
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `(A, B, C, D)`.
    pub fn coefficients(&self) -> [f64; 4] {
        [self.normal.x, self.normal.y, self.normal.z, self.offset]
    }

    pub fn flipped(&self) -> CropPlane {
        CropPlane { normal: -self.normal, offset: -self.offset }
    }

    #[inline]
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        signed_distance(self, p)
    }

    pub fn rotated(&self, r: Mat3) -> CropPlane {
        // Rotations leave the distance to the origin unchanged.
        CropPlane { normal: r * self.normal, offset: self.offset }
    }

    pub fn translated(&self, t: Vec3) -> CropPlane {
        CropPlane { normal: self.normal, offset: self.offset - self.normal.dot(t) }
    }
}

#[inline]
pub fn signed_distance(plane: &CropPlane, p: Vec3) -> f64 {
    plane.normal.dot(p) + plane.offset
}

/// Left and right eye-orbit centers in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyePair3D {
    pub left: Vec3,
    pub right: Vec3,
    pub radius_left: f64,
    pub radius_right: f64,
    pub confidence: f64,
}

impl EyePair3D {
    pub fn new(left: Vec3, right: Vec3, radius_left: f64, radius_right: f64, confidence: f64) -> Result<Self> {
        if !(left.is_finite() && right.is_finite()) {
            return Err(Error::invalid("eyes", "non-finite eye center"));
        }
        if right.x <= left.x {
            return Err(Error::EyesNotFound);
        }
        if !(radius_left > 0.0 && radius_right > 0.0) {
            return Err(Error::invalid("radius", "eye radii must be positive"));
        }
        Ok(EyePair3D { left, right, radius_left, radius_right, confidence })
    }

    pub fn midpoint(&self) -> Vec3 {
        (self.left + self.right) * 0.5
    }

    pub fn mean_radius(&self) -> f64 {
        0.5 * (self.radius_left + self.radius_right)
    }

    /// Rotates both centers; no re-validation of the left/right order.
    pub fn rotated(&self, r: Mat3) -> EyePair3D {
        EyePair3D { left: r * self.left, right: r * self.right, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bounding_box_two_points() {
        let c = PointCloud::new(vec![Vec3::ZERO, Vec3::new(1.0, 2.0, 3.0)]).unwrap();
        let b = bounding_box(&c).unwrap();
        assert_eq!(b.min, Vec3::ZERO);
        assert_eq!(b.max, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn bounding_box_single_point_is_degenerate() {
        let p = Vec3::new(-4.0, 0.5, 9.0);
        let b = bounding_box(&PointCloud::new(vec![p]).unwrap()).unwrap();
        assert_eq!(b.min, p);
        assert_eq!(b.max, p);
    }

    #[test]
    fn bounding_box_matches_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec3> = (0..100)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let b = bounding_box(&PointCloud::new(pts.clone()).unwrap()).unwrap();
        for axis in 0..3 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in &pts {
                if p[axis] < lo {
                    lo = p[axis];
                }
                if p[axis] > hi {
                    hi = p[axis];
                }
            }
            assert_eq!(b.min[axis], lo);
            assert_eq!(b.max[axis], hi);
            assert!(lo >= -1.0 && hi <= 1.0);
        }
    }

    #[test]
    fn bounding_box_rejects_empty() {
        assert_eq!(bounding_box(&PointCloud::default()), Err(Error::EmptyCloud));
    }

    #[test]
    fn rejects_non_finite_points() {
        assert!(PointCloud::new(vec![Vec3::new(f64::NAN, 0.0, 0.0)]).is_err());
        assert!(PointCloud::new(vec![Vec3::new(0.0, f64::INFINITY, 0.0)]).is_err());
    }

    #[test]
    fn signed_distance_examples() {
        let z1 = CropPlane::new(Vec3::new(0.0, 0.0, 1.0), -1.0).unwrap();
        assert_eq!(z1.signed_distance(Vec3::new(0.0, 0.0, 2.0)), 1.0);
        assert_eq!(z1.signed_distance(Vec3::new(0.0, 0.0, 1.0)), 0.0);
        let x0 = CropPlane::new(Vec3::new(1.0, 0.0, 0.0), 0.0).unwrap();
        assert_eq!(x0.signed_distance(Vec3::new(-3.0, 5.0, 7.0)), -3.0);
    }

    #[test]
    fn plane_rejects_non_unit_normal() {
        assert!(CropPlane::new(Vec3::new(0.0, 0.0, 2.0), 0.0).is_err());
        assert!(CropPlane::new(Vec3::new(0.0, 0.0, 1.0 + 1e-8), 0.0).is_err());
        assert!(CropPlane::new(Vec3::new(0.0, 0.0, 1.0 + 1e-10), 0.0).is_ok());
    }

    #[test]
    fn eye_pair_requires_right_of_left() {
        let l = Vec3::new(-1.0, 0.0, 1.0);
        let r = Vec3::new(1.0, 0.0, 1.0);
        assert!(EyePair3D::new(l, r, 1.0, 1.0, 1.0).is_ok());
        assert_eq!(EyePair3D::new(r, l, 1.0, 1.0, 1.0), Err(Error::EyesNotFound));
        assert_eq!(EyePair3D::new(l, l, 1.0, 1.0, 1.0), Err(Error::EyesNotFound));
        assert!(EyePair3D::new(l, r, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn pose_rotation_is_orthonormal() {
        let r = Mat3::from_pose_deg(17.0, -12.0, 5.0);
        let i = r * r.transpose();
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((i.0[a][b] - want).abs() < 1e-12);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn v3() -> impl Strategy<Value = Vec3> {
            (-100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
        }

        fn plane() -> impl Strategy<Value = CropPlane> {
            (v3(), -50.0..50.0f64)
                .prop_filter("non-zero", |(n, _)| n.norm() > 1e-3)
                .prop_map(|(n, d)| CropPlane::new(n.normalized().unwrap(), d).unwrap())
        }

        proptest! {
            #[test]
            fn signed_distance_is_affine(pl in plane(), p in v3(), q in v3(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
                let lhs = pl.signed_distance(p * a + q * b);
                let rhs = a * pl.signed_distance(p) + b * pl.signed_distance(q) + pl.offset() * (1.0 - a - b);
                prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs().max(rhs.abs()) + 100.0 * (a.abs() + b.abs())));
            }

            #[test]
            fn common_translation_keeps_decisions(pl in plane(), t in v3(), pts in proptest::collection::vec(v3(), 1..40)) {
                let moved = pl.translated(t);
                for p in pts {
                    let d0 = pl.signed_distance(p);
                    // Skip points the rounding of the shift could move across the boundary.
                    if d0.abs() > 1e-9 {
                        prop_assert_eq!(d0 > 0.0, moved.signed_distance(p + t) > 0.0);
                    }
                }
            }
        }
    }
}
