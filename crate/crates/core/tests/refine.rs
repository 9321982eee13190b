use facecloud_core::facecrop::{build_crop_plane, crop, refine, CropConfig, Stage};
use facecloud_core::geometry::{Mat3, Region};
use facecloud_core::sampling::{apply_mask, MaskSpec};
use facecloud_core::synth::{
    curvature_summary, generate_dataset, generate_head, ks_statistic, DatasetSpec, HeadParams, Landmark,
    ParamDistribution, Part,
};
use facecloud_core::{Error, Vec3};

#[test]
fn frontal_head_keeps_landmarks() {
    let (cloud, gt) = generate_head(&HeadParams::default(), 3).unwrap();
    let (_, report) = refine(&cloud, &CropConfig::default()).unwrap();
    assert!(report.retained_fraction > 0.2 && report.retained_fraction < 0.7, "{}", report.retained_fraction);
    for (q, lm) in cloud.points().iter().zip(&gt.landmarks) {
        if *lm != Landmark::None {
            assert!(report.plane.signed_distance(*q) > 0.0, "{lm:?} at {q:?} dropped");
        }
    }
}

#[test]
fn featureless_sphere_fails_at_hough() {
    let (cloud, _) = generate_head(&HeadParams::featureless_sphere(90.0, 4000), 5).unwrap();
    match refine(&cloud, &CropConfig::default()) {
        Err(Error::Refine { stage, source }) => {
            assert_eq!(stage, Stage::Hough);
            assert!(matches!(*source, Error::EyesNotFound), "{source:?}");
        }
        other => panic!("expected a Hough failure, got {other:?}"),
    }
}

#[test]
fn yawed_head_tilts_the_plane() {
    for yaw in [20.0, -20.0] {
        let params = HeadParams { pose: [yaw, 0.0, 0.0], ..HeadParams::default() };
        let (cloud, gt) = generate_head(&params, 11).unwrap();
        let (_, report) = refine(&cloud, &CropConfig::default()).unwrap();
        let expected = Mat3::from_pose_deg(yaw, 0.0, 0.0) * Vec3::new(0.0, 0.0, 1.0);
        let angle = report.plane.normal().dot(expected).clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle < 5.0, "yaw {yaw}: normal off by {angle} degrees");
        let frontal = report.plane.normal().dot(Vec3::new(0.0, 0.0, 1.0)).acos().to_degrees();
        assert!(frontal > 12.0, "yaw {yaw}: normal did not follow the head ({frontal} degrees)");
        let scale = 2.5;
        assert!((report.eyes.left - gt.eyes.left).norm() < 2.0 * scale);
        assert!((report.eyes.right - gt.eyes.right).norm() < 2.0 * scale);
    }
}

#[test]
fn larger_factor_retains_a_superset() {
    for pose in [[0.0, 0.0, 0.0], [15.0, -10.0, 0.0], [-18.0, 12.0, 0.0]] {
        let (cloud, _) = generate_head(&HeadParams { pose, ..HeadParams::default() }, 21).unwrap();
        let (_, report) = refine(&cloud, &CropConfig::default()).unwrap();
        let mut prev: Option<Vec<bool>> = None;
        for factor in [1.0, 1.5, 2.0, 2.3, 2.8, 3.5] {
            let plane = build_crop_plane(&report.eyes, factor).unwrap();
            let kept: Vec<bool> = cloud.points().iter().map(|&q| plane.signed_distance(q) > 0.0).collect();
            if let Some(p) = &prev {
                assert!(p.iter().zip(&kept).all(|(&a, &b)| !a || b), "factor {factor} lost points");
            }
            prev = Some(kept);
        }
    }
}

#[test]
fn glasses_band_keeps_eyes_and_drops_chin() {
    let params = HeadParams::default();
    let (cloud, gt) = generate_head(&params, 8).unwrap();
    let idx = gt.face_indices();
    let (face, face_gt) = (cloud.select(&idx), gt.select(&idx));
    let chin_y = params.eye_y - 0.85 * params.radii[1];
    let masked = apply_mask(&face, &MaskSpec::GLASSES, Some(&gt.eyes)).unwrap();
    let kept: std::collections::HashSet<[u64; 3]> =
        masked.points().iter().map(|p| p.to_array().map(f64::to_bits)).collect();
    let mut chin = 0;
    for ((q, part), lm) in face.points().iter().zip(&face_gt.parts).zip(&face_gt.landmarks) {
        let key = q.to_array().map(f64::to_bits);
        if *lm == Landmark::Eye {
            assert!(kept.contains(&key), "eye point {q:?} masked out");
        }
        if *part == Part::Head && q.y < chin_y {
            chin += 1;
            assert!(!kept.contains(&key), "chin point {q:?} kept");
        }
    }
    assert!(chin > 20, "too few chin points to be meaningful: {chin}");
}

fn summaries(distribution: ParamDistribution, seed: u64) -> Vec<f64> {
    let spec = DatasetSpec { n_per_class: 14, distribution, face_only: true, seed };
    generate_dataset(&spec)
        .unwrap()
        .iter()
        .map(|p| {
            let (cloud, _) = p.generate().unwrap();
            curvature_summary(&cloud, 16, 200, p.seed).unwrap()
        })
        .collect()
}

#[test]
fn population_shift_is_visible_in_curvature() {
    let a = summaries(ParamDistribution::default(), 1);
    let b = summaries(ParamDistribution::default(), 2);
    let shifted = summaries(ParamDistribution::shifted(), 3);
    let same = ks_statistic(&a, &b);
    let cross = ks_statistic(&a, &shifted);
    assert!(cross > same, "shifted {cross} vs same-population {same}");
}

#[test]
fn refine_is_deterministic() {
    let params = HeadParams { pose: [7.0, -4.0, 0.0], ..HeadParams::default() };
    let (cloud, _) = generate_head(&params, 13).unwrap();
    let (a, ra) = refine(&cloud, &CropConfig::default()).unwrap();
    let (b, rb) = refine(&cloud, &CropConfig::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(crop(&cloud, &ra.plane).unwrap(), a);
}

#[test]
fn tags_split_the_head_at_the_reference_plane() {
    let params = HeadParams { pose: [-12.0, 9.0, 0.0], ..HeadParams::default() };
    let (cloud, gt) = generate_head(&params, 4).unwrap();
    let plane = build_crop_plane(&gt.eyes, 2.3).unwrap();
    for ((q, tag), part) in cloud.points().iter().zip(&gt.tags).zip(&gt.parts) {
        let front = plane.signed_distance(*q) > 0.0;
        match part {
            Part::Neck => assert_eq!(*tag, Region::Neck),
            _ => assert_eq!(*tag == Region::Face, front),
        }
    }
}
