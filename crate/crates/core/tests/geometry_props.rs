use proptest::prelude::*;
use warpdiff::geometry::{
    lift_view, splat_features, Camera, FeatureImage, FeaturePointCloud, Mat3, RenderMask, Vec3,
};
use warpdiff::scenes::{random_scene, render_scene, scene_cameras, target_orbit};

fn camera(yaw: f64, pitch: f64, t: [f64; 3]) -> Camera<f64> {
    let r = Mat3::from_axis_angle(&Vec3::new(0.0, 1.0, 0.0), yaw)
        .matmul(&Mat3::from_axis_angle(&Vec3::new(1.0, 0.0, 0.0), pitch));
    Camera {
        rotation: r,
        translation: Vec3(t),
        ..Camera::centered(14.0, 12, 10)
    }
}

/// Per-pixel scan over every point: smallest depth, then smallest index.
fn brute_force(
    cloud: &FeaturePointCloud<f64>,
    cam: &Camera<f64>,
) -> (FeatureImage<f64>, RenderMask, FeatureImage<f64>) {
    let (h, w) = (cam.height, cam.width);
    let mut feat = FeatureImage::zeros(h, w, cloud.channels());
    let mut depth = FeatureImage::filled(h, w, 1, f64::INFINITY);
    let mut mask = RenderMask::new(h, w, false);
    for row in 0..h {
        for col in 0..w {
            let mut best: Option<(f64, usize)> = None;
            for (i, p) in cloud.positions().iter().enumerate() {
                let pc = cam.world_to_camera(p);
                let Some((u, v)) = cam.project_camera_point(&pc) else {
                    continue;
                };
                if !(u >= 0.0 && v >= 0.0 && u < w as f64 && v < h as f64) {
                    continue;
                }
                if (v.floor() as usize, u.floor() as usize) != (row, col) {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((d, j)) => pc.z() < d || (pc.z() == d && i < j),
                };
                if better {
                    best = Some((pc.z(), i));
                }
            }
            if let Some((d, i)) = best {
                feat.pixel_mut(row, col).copy_from_slice(cloud.feature(i));
                depth.set(row, col, 0, d);
                mask.set(row, col, true);
            }
        }
    }
    (feat, mask, depth)
}

fn cloud_strategy() -> impl Strategy<Value = FeaturePointCloud<f64>> {
    (1usize..300).prop_flat_map(|n| {
        (
            prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, -1.0..8.0f64), n),
            prop::collection::vec(-1.0..1.0f64, 2 * n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(pos, feat, dup)| {
                let mut positions: Vec<Vec3<f64>> = pos
                    .into_iter()
                    .map(|(x, y, z)| Vec3::new(x, y, z))
                    .collect();
                // exact duplicates exercise the tie rule
                for i in 1..positions.len() {
                    if dup[i] && i % 3 == 0 {
                        positions[i] = positions[i - 1];
                    }
                }
                FeaturePointCloud::new(positions, 2, feat).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn splat_matches_brute_force(cloud in cloud_strategy(), yaw in -0.4..0.4f64, pitch in -0.3..0.3f64) {
        let cam = camera(yaw, pitch, [0.1, -0.2, 0.5]);
        let s = splat_features(&cloud, &cam);
        let (feat, mask, depth) = brute_force(&cloud, &cam);
        prop_assert_eq!(s.features, feat);
        prop_assert_eq!(s.mask, mask);
        prop_assert_eq!(s.depth.data().iter().map(|d| d.to_bits()).collect::<Vec<_>>(),
                        depth.data().iter().map(|d| d.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn world_change_leaves_projections_unchanged(cloud in cloud_strategy(), angle in -3.0..3.0f64, shift in -2.0..2.0f64) {
        // x_old = A x_new + b, so x_new = Aᵀ (x_old - b)
        let a = Mat3::from_axis_angle(&Vec3::new(0.3, 0.9, -0.2), angle);
        let b = Vec3::new(shift, -0.5 * shift, 1.0);
        let cam = camera(0.1, -0.05, [0.0, 0.0, 0.5]);
        let moved_cloud = cloud.transformed(|p| a.transpose().mul_vec(&(*p - b)));
        let moved_cam = cam.reexpress(&a, &b);
        for (p, q) in cloud.positions().iter().zip(moved_cloud.positions()) {
            let (pc, qc) = (cam.world_to_camera(p), moved_cam.world_to_camera(q));
            prop_assert!((pc - qc).norm() < 1e-9);
        }
    }

    #[test]
    fn lift_then_project_recovers_pixels(depths in prop::collection::vec(0.5..10.0f64, 120), yaw in -1.0..1.0f64) {
        let cam = camera(yaw, 0.2, [0.3, 0.1, -0.4]);
        let depth = FeatureImage::from_vec(10, 12, 1, depths).unwrap();
        let img = FeatureImage::from_fn(10, 12, 1, |y, x, _| (y * 12 + x) as f64);
        let cloud = lift_view(&img, &depth, &cam).unwrap();
        for (p, f) in cloud.positions().iter().zip(cloud.features()) {
            let pc = cam.world_to_camera(p);
            let (u, v) = cam.project_camera_point(&pc).unwrap();
            let idx = *f as usize;
            prop_assert!((u - ((idx % 12) as f64 + 0.5)).abs() < 1e-9);
            prop_assert!((v - ((idx / 12) as f64 + 0.5)).abs() < 1e-9);
            prop_assert!((pc.z() - depth.data()[idx]).abs() < 1e-9);
        }
    }
}

#[test]
fn scene_round_trip_into_source_is_exact() {
    for seed in 0..8 {
        let spec = random_scene(seed);
        let cams = scene_cameras::<f64>(&spec, &target_orbit(&spec, 20.0, 2), 48, 48).unwrap();
        let (rgb, depth) = render_scene(&spec, &cams[0]);
        let cloud = lift_view(&rgb, &depth, &cams[0]).unwrap();
        let s = splat_features(&cloud, &cams[0]);
        for row in 0..48 {
            for col in 0..48 {
                assert_eq!(s.mask.get(row, col), depth.get(row, col, 0).is_finite());
                if s.mask.get(row, col) {
                    assert_eq!(s.features.pixel(row, col), rgb.pixel(row, col));
                }
            }
        }
    }
}

#[test]
fn scene_warp_matches_render_where_mutually_visible() {
    let mut checked = 0;
    for seed in 0..8 {
        let spec = random_scene(100 + seed);
        let cams = scene_cameras::<f64>(&spec, &target_orbit(&spec, 15.0, 2), 48, 48).unwrap();
        let (rgb, depth) = render_scene(&spec, &cams[0]);
        let (rgb1, depth1) = render_scene(&spec, &cams[1]);
        let s = splat_features(&lift_view(&rgb, &depth, &cams[0]).unwrap(), &cams[1]);
        for row in 0..48 {
            for col in 0..48 {
                let visible = s.mask.get(row, col)
                    && (s.depth.get(row, col, 0) - depth1.get(row, col, 0)).abs() <= 0.1;
                if visible {
                    for c in 0..3 {
                        assert!(
                            (s.features.get(row, col, c) - rgb1.get(row, col, c)).abs() <= 1e-6
                        );
                    }
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 500);
}
