use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use warpdiff::diffusion::{
    euler_update, euler_update_via_estimate, gaussian_image, ConditioningBundle, ConditioningMode,
    GaussianOracleDenoiser, LiftedSource, NoiseSchedule, ScheduleConfig, SourceView,
    TrajectorySampler, WarpedTarget,
};
use warpdiff::features::{ChannelProjector, ToyExtractor};
use warpdiff::geometry::{plucker_ray_map, FeatureImage, RenderMask};
use warpdiff::scenes::{random_scene, render_views, scene_cameras, target_orbit};

proptest! {
    #[test]
    fn euler_forms_agree(seed in any::<u64>(), s in 0.002..80.0f64, frac in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian_image::<f64>(&mut rng, 4, 4, 3).map(|v| v * s);
        let eps = gaussian_image::<f64>(&mut rng, 4, 4, 3);
        let next = s * frac;
        let a = euler_update(&x, &eps, s, next).unwrap();
        let b = euler_update_via_estimate(&x, &eps, s, next).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() < 1e-9 * s.max(1.0));
    }
}

fn scene_views(seed: u64, res: usize) -> Vec<SourceView<f64>> {
    let spec = random_scene(seed);
    let cams = scene_cameras(&spec, &target_orbit(&spec, 30.0, 4), res, res).unwrap();
    render_views(&spec, &cams)
}

#[test]
fn oracle_samples_follow_the_gaussian() {
    let h = 4;
    let mean = FeatureImage::from_fn(h, h, 3, |y, x, c| 0.2 + 0.1 * (y + x + c) as f64 / 3.0);
    let var = FeatureImage::from_fn(h, h, 3, |y, _, _| 0.01 + 0.01 * y as f64);
    let oracle = GaussianOracleDenoiser::new(mean.clone(), var.clone()).unwrap();
    let schedule = NoiseSchedule::karras(ScheduleConfig {
        steps: 100,
        ..Default::default()
    })
    .unwrap();
    let views = scene_views(0, h);
    let ex = ToyExtractor::seeded(4, 0);
    let proj = ChannelProjector::seeded(4, 2, 0).unwrap();
    let sampler = TrajectorySampler {
        denoiser: &oracle,
        schedule: &schedule,
        mode: ConditioningMode::RayOnly,
        extractor: &ex,
        projector: &proj,
        parallel: false,
        record_every: None,
    };
    let targets: Vec<_> = std::iter::repeat_n(views[1].camera.clone(), 3000).collect();
    let frames = sampler.sample(&views[0], &targets, 5).unwrap();
    let n = frames.len() as f64;
    for i in 0..mean.data().len() {
        let m = frames.iter().map(|f| f.image.data()[i]).sum::<f64>() / n;
        let v = frames
            .iter()
            .map(|f| (f.image.data()[i] - m).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        assert!(
            (m - mean.data()[i]).abs() < 0.05,
            "mean {m} vs {}",
            mean.data()[i]
        );
        assert!(
            (v / var.data()[i] - 1.0).abs() < 0.15,
            "var {v} vs {}",
            var.data()[i]
        );
    }
}

fn sampler_parts() -> (
    GaussianOracleDenoiser<f64>,
    NoiseSchedule<f64>,
    ToyExtractor<f64>,
    ChannelProjector<f64>,
) {
    let mean = FeatureImage::filled(12, 12, 3, 0.4);
    (
        GaussianOracleDenoiser::isotropic(mean, 0.02).unwrap(),
        NoiseSchedule::karras(ScheduleConfig {
            steps: 12,
            ..Default::default()
        })
        .unwrap(),
        ToyExtractor::seeded(6, 1),
        ChannelProjector::seeded(6, 3, 2).unwrap(),
    )
}

#[test]
fn frames_are_independent_and_parallel_safe() {
    let (oracle, schedule, ex, proj) = sampler_parts();
    let views = scene_views(3, 12);
    for mode in ConditioningMode::ALL {
        let mut sampler = TrajectorySampler {
            denoiser: &oracle,
            schedule: &schedule,
            mode,
            extractor: &ex,
            projector: &proj,
            parallel: false,
            record_every: Some(5),
        };
        let cams: Vec<_> = views[1..].iter().map(|v| v.camera.clone()).collect();
        let seq = sampler.sample(&views[0], &cams, 9).unwrap();
        sampler.parallel = true;
        let par = sampler.sample(&views[0], &cams, 9).unwrap();
        assert_eq!(seq, par);
        // frame 1 only depends on its own camera and seed + 1
        let swapped = vec![cams[2].clone(), cams[1].clone()];
        let other = sampler.sample(&views[0], &swapped, 9).unwrap();
        assert_eq!(other[1].image, seq[1].image);
        assert_eq!(
            seq[0]
                .intermediates
                .iter()
                .map(|(s, _)| *s)
                .collect::<Vec<_>>(),
            vec![0, 5, 10]
        );
    }
}

#[test]
fn iterative_slot_is_warped_where_mask_is_set() {
    let (_, _, ex, proj) = sampler_parts();
    let views = scene_views(4, 12);
    let lifted = LiftedSource::new(&views[0], ConditioningMode::IterativeFeat, &ex).unwrap();
    let warped = WarpedTarget::new(&lifted, &views[1].camera, &proj).unwrap();
    let mut bundle = warped.initial_bundle(ConditioningMode::IterativeFeat);
    assert_eq!(bundle.iter_feat, warped.feat);
    let estimate =
        FeatureImage::from_fn(12, 12, 3, |y, x, c| ((y * 5 + x * 3 + c) % 7) as f64 / 7.0);
    warped
        .refresh_iterative(&mut bundle, &estimate, &ex, &proj)
        .unwrap();
    let fused = bundle.iter_feat.unwrap();
    let wf = warped.feat.unwrap();
    for row in 0..12 {
        for col in 0..12 {
            if warped.mask.get(row, col) {
                assert_eq!(fused.pixel(row, col), wf.pixel(row, col));
            }
        }
    }
}

#[test]
fn ray_only_bundle_is_valid() {
    let views = scene_views(5, 8);
    let b = ConditioningBundle::ray_only(plucker_ray_map(&views[0].camera));
    b.validate().unwrap();
    assert_eq!(b.mask, RenderMask::new(8, 8, false));
}
