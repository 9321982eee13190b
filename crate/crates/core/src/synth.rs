//! Parametric synthetic heads with ground truth.
//!
//! A head is a star-shaped surface `r = R(w)` over unit directions `w`: a
//! superquadric (an ellipsoid at exponent 2) with two orbit bowls, a nose
//! ridge and a mouth patch whose saddle-shaped radial displacement is
//! scaled by the expression value `kappa`. Two dense eyeball spheres sit in
//! the orbits and a cylindrical neck hangs below. Surface points are
//! uniform by area; noise is radial, Gaussian and truncated at 4 sigma.
//! The pose rotation is applied last, to points and ground truth alike.
//!
//! Coordinates are millimetres, head center at the origin, `+y` up, `+z`
//! out of the face and `+x` to the viewer's right.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facecrop::build_crop_plane;
use crate::geometry::{EyePair3D, Mat3, PointCloud, Region, Vec3};
use crate::seed;

/// Crop offset, in orbit radii, that places the face boundary.
pub const FACE_PLANE_FACTOR: f64 = 2.3;

/// What a point was sampled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Head,
    LeftEye,
    RightEye,
    Neck,
}

/// Facial landmark a point belongs to, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Landmark {
    None,
    Eye,
    Nose,
    Mouth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadParams {
    /// Semi-axes `(a, b, c)` along x, y, z.
    pub radii: [f64; 3],
    /// Superquadric exponent; 2 is an ellipsoid, larger is boxier.
    pub exponent: f64,
    /// Eye center offset from the midline, before pose.
    pub eye_x: f64,
    /// Eye height, before pose.
    pub eye_y: f64,
    pub eye_radius: f64,
    pub orbit_depth: f64,
    pub nose_amplitude: f64,
    pub mouth_amplitude: f64,
    /// Expression value in `[-1, 1]`.
    pub kappa: f64,
    pub n_classes: usize,
    /// Head surface points.
    pub n_points: usize,
    /// Points per eyeball; 0 leaves the orbits empty.
    pub eye_points: usize,
    pub neck_points: usize,
    pub neck_radius: f64,
    pub neck_length: f64,
    pub noise_sigma: f64,
    /// `(yaw, pitch, roll)` in degrees.
    pub pose: [f64; 3],
}

impl Default for HeadParams {
    fn default() -> Self {
        HeadParams {
            radii: [72.0, 100.0, 90.0],
            exponent: 2.5,
            eye_x: 30.0,
            eye_y: 27.0,
            eye_radius: 12.5,
            orbit_depth: 6.0,
            nose_amplitude: 14.0,
            mouth_amplitude: 16.0,
            kappa: 0.0,
            n_classes: 3,
            n_points: 3000,
            eye_points: 1200,
            neck_points: 500,
            neck_radius: 42.0,
            neck_length: 40.0,
            noise_sigma: 0.5,
            pose: [0.0; 3],
        }
    }
}

impl HeadParams {
    /// A plain sphere with no facial features.
    pub fn featureless_sphere(radius: f64, n_points: usize) -> Self {
        HeadParams {
            radii: [radius; 3],
            exponent: 2.0,
            orbit_depth: 0.0,
            nose_amplitude: 0.0,
            mouth_amplitude: 0.0,
            n_points,
            eye_points: 0,
            neck_points: 0,
            ..HeadParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !self.radii.iter().all(|&r| pos(r)) {
            return Err(Error::invalid("radii", "must be positive"));
        }
        if !(self.exponent >= 1.0 && self.exponent.is_finite()) {
            return Err(Error::invalid("exponent", "must be at least 1"));
        }
        if !pos(self.eye_radius) || !pos(self.neck_radius) || !(self.neck_length >= 0.0) {
            return Err(Error::invalid("eye_radius", "radii and lengths must be positive"));
        }
        let front = libm::pow(libm::fabs(self.eye_x / self.radii[0]), self.exponent)
            + libm::pow(libm::fabs(self.eye_y / self.radii[1]), self.exponent);
        if !(front < 0.95) {
            return Err(Error::invalid("eye_x", "orbits must lie on the front hemisphere"));
        }
        if !(self.eye_x > self.eye_radius) {
            return Err(Error::invalid("eye_x", "eyes overlap the midline"));
        }
        if !(-1.0..=1.0).contains(&self.kappa) {
            return Err(Error::invalid("kappa", "must lie in [-1, 1]"));
        }
        if self.n_classes == 0 {
            return Err(Error::invalid("n_classes", "must be at least 1"));
        }
        if self.n_points < 500 {
            return Err(Error::invalid("n_points", "need at least 500 points"));
        }
        for (name, v) in [
            ("orbit_depth", self.orbit_depth),
            ("nose_amplitude", self.nose_amplitude),
            ("mouth_amplitude", self.mouth_amplitude),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and non-negative"));
            }
        }
        if !self.pose.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("pose", "must be finite"));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Mat3 {
        Mat3::from_pose_deg(self.pose[0], self.pose[1], self.pose[2])
    }
}

/// Expression class of `kappa`: `[-1, 1]` split into `n_classes` equal
/// bands, lowest band first.
pub fn label_for_kappa(kappa: f64, n_classes: usize) -> usize {
    let k = n_classes.max(1);
    let t = ((kappa.clamp(-1.0, 1.0) + 1.0) * 0.5 * k as f64) as usize;
    t.min(k - 1)
}

/// `[lo, hi]` band of class `label`.
pub fn kappa_band(label: usize, n_classes: usize) -> (f64, f64) {
    let w = 2.0 / n_classes as f64;
    (-1.0 + w * label as f64, -1.0 + w * (label + 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Eyeball centers and radii after pose; `left` has the smaller x.
    pub eyes: EyePair3D,
    pub label: usize,
    pub kappa: f64,
    pub tags: Vec<Region>,
    pub parts: Vec<Part>,
    pub landmarks: Vec<Landmark>,
}

impl GroundTruth {
    pub fn select(&self, indices: &[usize]) -> GroundTruth {
        GroundTruth {
            eyes: self.eyes,
            label: self.label,
            kappa: self.kappa,
            tags: indices.iter().map(|&i| self.tags[i]).collect(),
            parts: indices.iter().map(|&i| self.parts[i]).collect(),
            landmarks: indices.iter().map(|&i| self.landmarks[i]).collect(),
        }
    }

    pub fn face_indices(&self) -> Vec<usize> {
        (0..self.tags.len()).filter(|&i| self.tags[i] == Region::Face).collect()
    }
}

/// The deformed head surface in the head frame.
#[derive(Debug, Clone)]
pub struct HeadSurface {
    p: HeadParams,
    /// Orbit anchor points on the undeformed surface, left then right.
    orbit_dirs: [Vec3; 2],
    orbit_surface: [f64; 2],
    eye_centers: [Vec3; 2],
    mouth_y: f64,
}

impl HeadSurface {
    pub fn new(p: &HeadParams) -> Result<Self> {
        p.validate()?;
        let [a, b, c] = p.radii;
        let e = p.exponent;
        let mut orbit_dirs = [Vec3::ZERO; 2];
        let mut orbit_surface = [0.0; 2];
        let mut eye_centers = [Vec3::ZERO; 2];
        for (i, sx) in [-1.0, 1.0].into_iter().enumerate() {
            let x = sx * p.eye_x;
            let rest = 1.0 - libm::pow(libm::fabs(x / a), e) - libm::pow(libm::fabs(p.eye_y / b), e);
            let s = Vec3::new(x, p.eye_y, c * libm::pow(rest, 1.0 / e));
            let dir = s.normalized().ok_or(Error::DegenerateGeometry("orbit at origin"))?;
            orbit_dirs[i] = dir;
            orbit_surface[i] = s.norm();
            eye_centers[i] = dir * (s.norm() - 0.8 * p.eye_radius);
        }
        let mouth_y = p.eye_y - 0.72 * p.radii[1];
        Ok(HeadSurface { p: *p, orbit_dirs, orbit_surface, eye_centers, mouth_y })
    }

    pub fn params(&self) -> &HeadParams {
        &self.p
    }

    /// Eyeball centers before pose, left then right.
    pub fn eye_centers(&self) -> [Vec3; 2] {
        self.eye_centers
    }

    /// Undeformed superquadric radius along unit direction `w`.
    pub fn base_radius(&self, w: Vec3) -> f64 {
        let [a, b, c] = self.p.radii;
        let e = self.p.exponent;
        let s = libm::pow(libm::fabs(w.x / a), e) + libm::pow(libm::fabs(w.y / b), e) + libm::pow(libm::fabs(w.z / c), e);
        libm::pow(s, -1.0 / e)
    }

    fn mouth_uv(&self, q: Vec3) -> Option<(f64, f64)> {
        if q.z <= 0.0 {
            return None;
        }
        let width = 0.6 * self.p.radii[0];
        let height = 0.3 * self.p.radii[1];
        let u = q.x / width;
        let v = (q.y - self.mouth_y) / height;
        (u * u + v * v < 1.0).then_some((u, v))
    }

    fn nose_bump(&self, q: Vec3) -> f64 {
        if q.z <= 0.0 || self.p.nose_amplitude == 0.0 {
            return 0.0;
        }
        let wx = 0.11 * self.p.radii[0];
        let wy = 0.16 * self.p.radii[1];
        let yc = self.p.eye_y - 0.35 * self.p.radii[1];
        let dy = q.y - yc;
        self.p.nose_amplitude * libm::exp(-q.x * q.x / (2.0 * wx * wx) - dy * dy / (2.0 * wy * wy))
    }

    fn orbit_bowl(&self, w: Vec3) -> f64 {
        let rho_max = 1.3 * self.p.eye_radius;
        let mut depth = 0.0;
        for i in 0..2 {
            let cosang = w.dot(self.orbit_dirs[i]).clamp(-1.0, 1.0);
            let rho = libm::acos(cosang) * self.orbit_surface[i];
            if rho < rho_max {
                let t = rho / rho_max;
                depth += self.p.orbit_depth * (1.0 - t * t);
            }
        }
        depth
    }

    /// Deformed surface radius along unit direction `w`.
    pub fn radius(&self, w: Vec3) -> f64 {
        let r0 = self.base_radius(w);
        let q = w * r0;
        let mut r = r0 - self.orbit_bowl(w) + self.nose_bump(q);
        if let Some((u, v)) = self.mouth_uv(q) {
            let fall = 1.0 - (u * u + v * v);
            r += self.p.kappa * self.p.mouth_amplitude * (2.0 * u * u - 1.0) * fall * fall;
        }
        r
    }

    /// Surface area per unit solid angle along `w`.
    fn area_weight(&self, w: Vec3) -> f64 {
        let h = 1e-4;
        let seed_axis = if libm::fabs(w.x) < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::Y };
        let t1 = w.cross(seed_axis).normalized().unwrap_or(Vec3::Y);
        let t2 = w.cross(t1);
        let r = self.radius(w);
        let d = |t: Vec3| {
            let fwd = (w + t * h).normalized().unwrap_or(w);
            let bwd = (w - t * h).normalized().unwrap_or(w);
            (self.radius(fwd) - self.radius(bwd)) / (2.0 * h)
        };
        let (g1, g2) = (d(t1), d(t2));
        r * libm::sqrt(r * r + g1 * g1 + g2 * g2)
    }

    fn landmark(&self, q: Vec3) -> Landmark {
        if self.p.eye_points > 0 && self.orbit_bowl(q.normalized().unwrap_or(Vec3::Y)) > 0.0 {
            return Landmark::Eye;
        }
        let q0 = q.normalized().map(|w| w * self.base_radius(w)).unwrap_or(q);
        if self.p.nose_amplitude > 0.0 && self.nose_bump(q0) > 0.3 * self.p.nose_amplitude {
            return Landmark::Nose;
        }
        if self.mouth_uv(q0).is_some() {
            return Landmark::Mouth;
        }
        Landmark::None
    }

    fn in_neck(&self, q: Vec3) -> bool {
        let dz = q.z - self.neck_axis_z();
        q.y < 0.0 && q.x * q.x + dz * dz < self.p.neck_radius * self.p.neck_radius
    }

    fn neck_axis_z(&self) -> f64 {
        -0.12 * self.p.radii[2]
    }
}

fn truncated_noise(rng: &mut ChaCha8Rng, normal: Option<&Normal<f64>>, sigma: f64) -> f64 {
    match normal {
        None => 0.0,
        Some(n) => loop {
            let t = n.sample(rng);
            if libm::fabs(t) <= 4.0 * sigma {
                break t;
            }
        },
    }
}

fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    Vec3::new(x, y, z)
}

fn fibonacci_dir(i: usize, n: usize) -> Vec3 {
    let golden = core::f64::consts::PI * (3.0 - libm::sqrt(5.0));
    let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
    let r = libm::sqrt(1.0 - y * y);
    let t = golden * i as f64;
    Vec3::new(r * libm::cos(t), y, r * libm::sin(t))
}

/// Generates one head. The cloud carries region tags.
pub fn generate_head(params: &HeadParams, seed: u64) -> Result<(PointCloud, GroundTruth)> {
    let surf = HeadSurface::new(params)?;
    let p = params;
    let mut rng = seed::rng(seed);
    let sigma = p.noise_sigma;
    let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));

    let total = p.n_points + 2 * p.eye_points + p.neck_points;
    let mut points = Vec::with_capacity(total);
    let mut parts = Vec::with_capacity(total);

    let w_max = 1.5 * (0..4096).map(|i| surf.area_weight(fibonacci_dir(i, 4096))).fold(0.0, f64::max);
    while points.len() < p.n_points {
        let w = unit(&mut rng);
        if rng.random::<f64>() * w_max > surf.area_weight(w) {
            continue;
        }
        let q = w * (surf.radius(w) + truncated_noise(&mut rng, normal.as_ref(), sigma));
        if p.neck_points > 0 && surf.in_neck(q) {
            continue;
        }
        points.push(q);
        parts.push(Part::Head);
    }
    for (i, part) in [Part::LeftEye, Part::RightEye].into_iter().enumerate() {
        for _ in 0..p.eye_points {
            let w = unit(&mut rng);
            let r = p.eye_radius + truncated_noise(&mut rng, normal.as_ref(), sigma);
            points.push(surf.eye_centers[i] + w * r);
            parts.push(part);
        }
    }
    let axis_z = surf.neck_axis_z();
    let mut placed = 0;
    while placed < p.neck_points {
        let phi = rng.random_range(0.0..core::f64::consts::TAU);
        let y = -rng.random_range(0.0..p.radii[1] + p.neck_length);
        let r = p.neck_radius + truncated_noise(&mut rng, normal.as_ref(), sigma);
        let q = Vec3::new(r * libm::sin(phi), y, axis_z + r * libm::cos(phi));
        let w = q.normalized().unwrap_or(Vec3::Y);
        if q.norm() <= surf.base_radius(w) {
            continue;
        }
        points.push(q);
        parts.push(Part::Neck);
        placed += 1;
    }

    let landmarks: Vec<Landmark> = points
        .iter()
        .zip(&parts)
        .map(|(&q, &part)| match part {
            Part::LeftEye | Part::RightEye => Landmark::Eye,
            Part::Neck => Landmark::None,
            Part::Head => surf.landmark(q),
        })
        .collect();

    let rot = p.rotation();
    let posed: Vec<Vec3> = points.iter().map(|&q| rot * q).collect();
    let [l, r] = surf.eye_centers.map(|e| rot * e);
    let (left, right) = if l.x <= r.x { (l, r) } else { (r, l) };
    let eyes = EyePair3D { left, right, radius_left: p.eye_radius, radius_right: p.eye_radius, confidence: 1.0 };
    let plane = build_crop_plane(&eyes, FACE_PLANE_FACTOR)?;
    let tags: Vec<Region> = posed
        .iter()
        .zip(&parts)
        .map(|(&q, &part)| match part {
            Part::Neck => Region::Neck,
            _ if plane.signed_distance(q) > 0.0 => Region::Face,
            _ => Region::Skull,
        })
        .collect();
    let cloud = PointCloud::with_tags(posed, tags.clone())?;
    let gt = GroundTruth { eyes, label: label_for_kappa(p.kappa, p.n_classes), kappa: p.kappa, tags, parts, landmarks };
    Ok((cloud, gt))
}

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Span { lo, hi }
    }

    pub const fn fixed(v: f64) -> Self {
        Span { lo: v, hi: v }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    fn valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

/// Distribution of head parameters across a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamDistribution {
    pub base: HeadParams,
    /// Relative jitter of each semi-axis.
    pub radii_scale: Span,
    pub radii_jitter: f64,
    pub eye_x: Span,
    pub eye_y: Span,
    pub eye_radius: Span,
    pub nose_amplitude: Span,
    pub mouth_amplitude: Span,
    pub noise_sigma: Span,
    pub yaw: Span,
    pub pitch: Span,
    pub roll: Span,
    /// Fraction of each class band kept clear at both ends.
    pub kappa_margin: f64,
}

impl Default for ParamDistribution {
    fn default() -> Self {
        ParamDistribution {
            base: HeadParams::default(),
            radii_scale: Span::fixed(1.0),
            radii_jitter: 0.04,
            eye_x: Span::new(28.5, 31.5),
            eye_y: Span::new(25.0, 29.0),
            eye_radius: Span::new(11.5, 13.5),
            nose_amplitude: Span::new(12.0, 16.0),
            mouth_amplitude: Span::new(14.0, 18.0),
            noise_sigma: Span::new(0.2, 1.0),
            yaw: Span::new(-20.0, 20.0),
            pitch: Span::new(-20.0, 20.0),
            roll: Span::fixed(0.0),
            kappa_margin: 0.25,
        }
    }
}

impl ParamDistribution {
    /// A second population with smaller, rounder heads, weaker mouths and
    /// more noise.
    pub fn shifted() -> Self {
        ParamDistribution {
            base: HeadParams { exponent: 2.2, ..HeadParams::default() },
            radii_scale: Span::new(0.88, 0.94),
            radii_jitter: 0.06,
            eye_x: Span::new(26.0, 28.5),
            eye_y: Span::new(22.0, 26.0),
            eye_radius: Span::new(10.5, 12.0),
            nose_amplitude: Span::new(9.0, 12.0),
            mouth_amplitude: Span::new(11.0, 14.0),
            noise_sigma: Span::new(0.8, 1.4),
            ..ParamDistribution::default()
        }
    }

    /// Narrow poses for classifier-only experiments.
    pub fn with_pose_range(mut self, yaw: f64, pitch: f64) -> Self {
        self.yaw = Span::new(-yaw, yaw);
        self.pitch = Span::new(-pitch, pitch);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let spans = [
            self.radii_scale,
            self.eye_x,
            self.eye_y,
            self.eye_radius,
            self.nose_amplitude,
            self.mouth_amplitude,
            self.noise_sigma,
            self.yaw,
            self.pitch,
            self.roll,
        ];
        if !spans.iter().all(Span::valid) {
            return Err(Error::invalid("distribution", "every span needs finite lo <= hi"));
        }
        if !(0.0..0.5).contains(&self.kappa_margin) {
            return Err(Error::invalid("kappa_margin", "must lie in [0, 0.5)"));
        }
        if !(0.0..0.5).contains(&self.radii_jitter) {
            return Err(Error::invalid("radii_jitter", "must lie in [0, 0.5)"));
        }
        self.base.validate()
    }

    /// Draws head parameters for a sample of class `label`.
    pub fn sample(&self, label: usize, rng: &mut ChaCha8Rng) -> HeadParams {
        let k = self.base.n_classes;
        let (lo, hi) = kappa_band(label, k);
        let m = self.kappa_margin * (hi - lo);
        let kappa = rng.random_range(lo + m..=hi - m).clamp(-1.0, 1.0);
        let scale = self.radii_scale.sample(rng);
        let mut radii = self.base.radii;
        for r in &mut radii {
            *r *= scale * (1.0 + rng.random_range(-self.radii_jitter..=self.radii_jitter));
        }
        HeadParams {
            radii,
            eye_x: self.eye_x.sample(rng) * scale,
            eye_y: self.eye_y.sample(rng) * scale,
            eye_radius: self.eye_radius.sample(rng),
            nose_amplitude: self.nose_amplitude.sample(rng),
            mouth_amplitude: self.mouth_amplitude.sample(rng),
            noise_sigma: self.noise_sigma.sample(rng),
            pose: [self.yaw.sample(rng), self.pitch.sample(rng), self.roll.sample(rng)],
            kappa,
            ..self.base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_per_class: usize,
    pub distribution: ParamDistribution,
    /// Keep only face-tagged points, as a face scanner would.
    pub face_only: bool,
    pub seed: u64,
}

/// One planned sample: everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub index: usize,
    pub label: usize,
    pub params: HeadParams,
    pub seed: u64,
    pub face_only: bool,
}

impl SamplePlan {
    pub fn generate(&self) -> Result<(PointCloud, GroundTruth)> {
        let (cloud, gt) = generate_head(&self.params, self.seed)?;
        if !self.face_only {
            return Ok((cloud, gt));
        }
        let idx = gt.face_indices();
        Ok((cloud.select(&idx), gt.select(&idx)))
    }
}

/// Class-balanced list of sample plans; labels interleave.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Vec<SamplePlan>> {
    if spec.n_per_class == 0 {
        return Err(Error::invalid("n_per_class", "must be at least 1"));
    }
    spec.distribution.validate()?;
    let k = spec.distribution.base.n_classes;
    let stage = seed::stage_seed(spec.seed, "synth");
    (0..spec.n_per_class * k)
        .map(|index| {
            let label = index % k;
            let s = seed::sample_seed(stage, index as u64);
            let mut rng = seed::rng(s);
            let params = spec.distribution.sample(label, &mut rng);
            params.validate()?;
            Ok(SamplePlan { index, label, params, seed: rng.random(), face_only: spec.face_only })
        })
        .collect()
}

/// Mean surface variation `l_min / (l1 + l2 + l3)` of the kNN covariance,
/// over `m` seeded probe points.
pub fn curvature_summary(cloud: &PointCloud, k: usize, m: usize, seed: u64) -> Result<f64> {
    let pts = cloud.points();
    if pts.len() < k || k < 3 {
        return Err(Error::CloudTooSmall { need: k.max(3), have: pts.len() });
    }
    let mut rng = seed::rng(seed);
    let probes: Vec<usize> = (0..m).map(|_| rng.random_range(0..pts.len())).collect();
    let groups = crate::sampling::knn_points(pts, &probes, k)?;
    let mut acc = 0.0;
    for g in &groups {
        let mean = g.iter().fold(Vec3::ZERO, |s, &i| s + pts[i]) / k as f64;
        let mut c = [[0.0; 3]; 3];
        for &i in g {
            let d = pts[i] - mean;
            for (a, row) in c.iter_mut().enumerate() {
                for (b, v) in row.iter_mut().enumerate() {
                    *v += d[a] * d[b];
                }
            }
        }
        let ev = symmetric_eigenvalues(c);
        let tr = ev[0] + ev[1] + ev[2];
        acc += if tr > 0.0 { ev[0] / tr } else { 0.0 };
    }
    Ok(acc / m.max(1) as f64)
}

/// Eigenvalues of a symmetric 3x3 matrix, ascending.
pub fn symmetric_eigenvalues(m: [[f64; 3]; 3]) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if p1 <= 1e-300 {
        let mut d = [m[0][0], m[1][1], m[2][2]];
        d.sort_by(f64::total_cmp);
        return d;
    }
    let sq = |v: f64| v * v;
    let p2 = sq(m[0][0] - q) + sq(m[1][1] - q) + sq(m[2][2] - q) + 2.0 * p1;
    let p = libm::sqrt(p2 / 6.0);
    let mut b = m;
    for (i, row) in b.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (m[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = libm::acos(r) / 3.0;
    let e1 = q + 2.0 * p * libm::cos(phi);
    let e3 = q + 2.0 * p * libm::cos(phi + 2.0 * core::f64::consts::PI / 3.0);
    let e2 = 3.0 * q - e1 - e3;
    [e3, e2, e1]
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max(libm::fabs(i as f64 / na - j as f64 / nb));
    }
    d
}

/// Counts of each tag, in `Region` declaration order.
pub fn tag_counts(tags: &[Region]) -> [usize; 3] {
    let mut c = [0; 3];
    for t in tags {
        c[match t {
            Region::Face => 0,
            Region::Skull => 1,
            Region::Neck => 2,
        }] += 1;
    }
    c
}

#[doc(hidden)]
pub fn nominal_offsets(params: &HeadParams, cloud_head_frame: &[Vec3], parts: &[Part]) -> Result<Vec<f64>> {
    let surf = HeadSurface::new(params)?;
    Ok(cloud_head_frame
        .iter()
        .zip(parts)
        .map(|(&q, &part)| match part {
            Part::Head => q.norm() - surf.radius(q.normalized().unwrap_or(Vec3::Y)),
            Part::LeftEye => (q - surf.eye_centers[0]).norm() - params.eye_radius,
            Part::RightEye => (q - surf.eye_centers[1]).norm() - params.eye_radius,
            Part::Neck => {
                let dz = q.z - surf.neck_axis_z();
                libm::sqrt(q.x * q.x + dz * dz) - params.neck_radius
            }
        })
        .collect())
}
