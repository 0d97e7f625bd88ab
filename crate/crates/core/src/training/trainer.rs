//! Noise-prediction training of [`TinyDenoiser`] on posed multi-view data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blur::{blur_at, BlurSchedule};
use super::network::grad_slices;
use super::tiny::{noise_prediction_loss, Architecture, LossEval, TinyDenoiser, SIGMA_DATA};
use crate::diffusion::{
    forward_noise, gaussian_image, ConditioningBundle, ConditioningMode, Denoiser, LiftedSource,
    NoiseSchedule, ScheduleConfig, SourceView, WarpedTarget,
};
use crate::error::{Error, Result};
use crate::features::{extract, fuse_features, l2_normalize, FeatureExtractor, ToyExtractor};
use crate::geometry::FeatureImage;
use crate::scalar::Real;
use crate::scenes::{random_scene, render_views, scene_cameras, target_orbit, SceneSpec};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_ENABLE_ITER_AFTER: f64 = 0.6;
pub const DEFAULT_EXTRACTOR_SEED: u64 = 0xFEA7;

/// Per-sample scaling of the noise-prediction error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossWeighting {
    /// Plain `mean((eps_hat - eps)^2)`.
    #[default]
    Epsilon,
    /// Scaled by `(sigma^2 + sigma_data^2) / sigma_data^2`, so every noise
    /// level contributes equally to the network-output error.
    Edm,
}

impl LossWeighting {
    pub fn weight(self, sigma: f64) -> f64 {
        match self {
            LossWeighting::Epsilon => 1.0,
            LossWeighting::Edm => {
                (sigma * sigma + SIGMA_DATA * SIGMA_DATA) / (SIGMA_DATA * SIGMA_DATA)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Sgd {
            lr: DEFAULT_LEARNING_RATE,
        }
    }
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerConfig::Sgd { lr } => lr > 0.0 && lr.is_finite(),
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                lr > 0.0
                    && lr.is_finite()
                    && (0.0..1.0).contains(&beta1)
                    && (0.0..1.0).contains(&beta2)
                    && eps > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid optimizer settings {self:?}"
            )))
        }
    }
}

/// First-order optimizer over a fixed list of parameter buffers.
struct Optimizer<T> {
    config: OptimizerConfig,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    fn new(config: OptimizerConfig) -> Self {
        Optimizer {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    fn apply(&mut self, params: Vec<&mut [T]>, grads: &[&[T]]) {
        self.step += 1;
        match self.config {
            OptimizerConfig::Sgd { lr } => {
                let lr = T::lit(lr);
                for (p, g) in params.into_iter().zip(grads) {
                    for (pv, &gv) in p.iter_mut().zip(g.iter()) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| vec![T::zero(); g.len()]).collect();
                    self.v = self.m.clone();
                }
                let (b1, b2) = (T::lit(beta1), T::lit(beta2));
                let c1 = T::one() - T::lit(beta1.powi(self.step));
                let c2 = T::one() - T::lit(beta2.powi(self.step));
                let (lr, eps) = (T::lit(lr), T::lit(eps));
                for (((p, g), m), v) in params
                    .into_iter()
                    .zip(grads)
                    .zip(&mut self.m)
                    .zip(&mut self.v)
                {
                    for (((pv, &gv), mv), vv) in p
                        .iter_mut()
                        .zip(g.iter())
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                    {
                        *mv = b1 * *mv + (T::one() - b1) * gv;
                        *vv = b2 * *vv + (T::one() - b2) * gv * gv;
                        *pv -= lr * (*mv / c1) / ((*vv / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Where training pairs come from when scenes are given directly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSampling {
    pub resolution: usize,
    /// Total orbit angle about each scene's look-at point.
    pub span_deg: f64,
    pub frame_count: usize,
}

impl Default for ViewSampling {
    fn default() -> Self {
        ViewSampling {
            resolution: 32,
            span_deg: 40.0,
            frame_count: 5,
        }
    }
}

impl ViewSampling {
    /// Renders all trajectory views of one scene.
    pub fn render<T: Real>(&self, spec: &SceneSpec) -> Result<Vec<SourceView<T>>> {
        let traj = target_orbit(spec, self.span_deg, self.frame_count);
        let cams = scene_cameras(spec, &traj, self.resolution, self.resolution)?;
        Ok(render_views(spec, &cams))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: ConditioningMode,
    pub schedule: ScheduleConfig,
    pub tau_min: f64,
    pub tau_max: f64,
    pub steps: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub weighting: LossWeighting,
    /// Fraction of `steps` after which iterative slots see blurred-target
    /// features instead of the warped ones.
    pub enable_iter_after: f64,
    pub architecture: Architecture,
    pub extractor_seed: u64,
    /// Update the feature projector along with the network.
    pub train_projector: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: ConditioningMode::RayOnly,
            schedule: ScheduleConfig::default(),
            tau_min: super::blur::DEFAULT_TAU_MIN,
            tau_max: super::blur::DEFAULT_TAU_MAX,
            steps: 2000,
            seed: 0,
            batch_size: 1,
            optimizer: OptimizerConfig::default(),
            weighting: LossWeighting::default(),
            enable_iter_after: DEFAULT_ENABLE_ITER_AFTER,
            architecture: Architecture::default(),
            extractor_seed: DEFAULT_EXTRACTOR_SEED,
            train_projector: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        self.blur()?;
        NoiseSchedule::<f64>::karras(self.schedule)?;
        self.optimizer.validate()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.enable_iter_after) {
            return Err(Error::InvalidArgument(format!(
                "enable-iter-after must be a fraction in [0, 1], got {}",
                self.enable_iter_after
            )));
        }
        Ok(())
    }

    pub fn blur(&self) -> Result<BlurSchedule> {
        BlurSchedule::new(self.tau_min, self.tau_max, self.schedule.steps)
    }

    pub fn extractor<T: Real>(&self) -> ToyExtractor<T> {
        ToyExtractor::seeded(self.architecture.feature_channels, self.extractor_seed)
    }

    /// First optimization step that uses the blur surrogate.
    pub fn iter_start(&self) -> usize {
        (self.enable_iter_after * self.steps as f64).ceil() as usize
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mean loss of each optimization step.
    pub losses: Vec<f64>,
}

/// One drawn training example.
#[derive(Clone, Debug)]
pub struct TrainingSample<T> {
    pub x0: FeatureImage<T>,
    pub noisy: FeatureImage<T>,
    pub eps: FeatureImage<T>,
    pub sigma: T,
    pub cond: ConditioningBundle<T>,
    /// Normalized raw features behind the warped and iterative slots.
    pub warped_normalized: Option<FeatureImage<T>>,
    pub iter_normalized: Option<FeatureImage<T>>,
}

/// Draws conditioning and noise for one source/target pair.
#[allow(clippy::too_many_arguments)]
pub fn build_sample<T: Real>(
    source: &SourceView<T>,
    target: &SourceView<T>,
    model: &TinyDenoiser<T>,
    extractor: &dyn FeatureExtractor<T>,
    mode: ConditioningMode,
    schedule: &NoiseSchedule<T>,
    blur: &BlurSchedule,
    index: usize,
    use_blur: bool,
    rng: &mut ChaCha8Rng,
) -> Result<TrainingSample<T>> {
    let sigma = schedule.sigma(index);
    let x0 = target.rgb.clone();
    let eps = gaussian_image(rng, x0.height(), x0.width(), 3);
    let noisy = forward_noise(&x0, sigma, &eps)?;
    let lifted = LiftedSource::new(source, mode, extractor)?;
    let warped = WarpedTarget::new(&lifted, &target.camera, model.projector())?;
    let mut cond = warped.initial_bundle(mode);
    let mut iter_normalized = None;
    if mode.is_iterative() {
        iter_normalized = warped.normalized_feat.clone();
        if use_blur {
            // sigma_max pairs with the strongest blur
            let blurred = blur_at(&x0, blur, schedule.steps() - index)?;
            if mode.uses_iter_rgb() {
                cond.iter_rgb = Some(fuse_features(&warped.rgb, &blurred, &warped.mask)?);
            }
            if mode.uses_iter_feat() {
                let warped_n = warped
                    .normalized_feat
                    .as_ref()
                    .expect("feature modes carry features");
                let current = l2_normalize(&extract(extractor, &blurred)?);
                let fused = fuse_features(warped_n, &current, &warped.mask)?;
                cond.iter_feat = Some(model.projector().apply(&fused)?);
                iter_normalized = Some(fused);
            }
        }
    }
    Ok(TrainingSample {
        x0,
        noisy,
        eps,
        sigma,
        cond,
        warped_normalized: if mode.uses_warped_feat() {
            warped.normalized_feat
        } else {
            None
        },
        iter_normalized: if mode.uses_iter_feat() {
            iter_normalized
        } else {
            None
        },
    })
}

/// Loss of one sample together with network and projector gradients.
pub fn sample_gradients<T: Real>(
    model: &TinyDenoiser<T>,
    sample: &TrainingSample<T>,
    weight: T,
) -> Result<(LossEval<T>, Vec<T>)> {
    let stack = sample.cond.to_channels(&model.layout())?;
    let eval = noise_prediction_loss(
        model.net(),
        &sample.noisy,
        &stack,
        sample.sigma,
        &sample.eps,
        weight,
    )?;
    let layout = model.layout();
    let (cin, cout) = (
        model.projector().input_dim(),
        model.projector().output_dim(),
    );
    let mut proj = vec![T::zero(); cin * cout];
    // the conditioning stack starts after the three noisy-image channels
    let slots = [
        (sample.warped_normalized.as_ref(), 3 + layout.warped_feat()),
        (sample.iter_normalized.as_ref(), 3 + layout.iter_feat()),
    ];
    for (normalized, offset) in slots {
        let Some(n) = normalized else { continue };
        for (src, g) in n.pixels().zip(eval.input_grad.pixels()) {
            let g = &g[offset..offset + cout];
            for (i, &a) in src.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (p, &gv) in proj[i * cout..(i + 1) * cout].iter_mut().zip(g) {
                    *p += a * gv;
                }
            }
        }
    }
    Ok((eval, proj))
}

/// One training draw: video, ordered frame pair, schedule index, noise.
#[allow(clippy::too_many_arguments)]
fn draw_sample<T: Real>(
    videos: &[Vec<SourceView<T>>],
    model: &TinyDenoiser<T>,
    extractor: &dyn FeatureExtractor<T>,
    config: &TrainConfig,
    schedule: &NoiseSchedule<T>,
    blur: &BlurSchedule,
    use_blur: bool,
    rng: &mut ChaCha8Rng,
) -> Result<TrainingSample<T>> {
    let video = &videos[rng.random_range(0..videos.len())];
    let src = rng.random_range(0..video.len());
    let tgt = (src + rng.random_range(1..video.len())) % video.len();
    let index = rng.random_range(0..=schedule.steps());
    build_sample(
        &video[src],
        &video[tgt],
        model,
        extractor,
        config.mode,
        schedule,
        blur,
        index,
        use_blur,
        rng,
    )
}

/// Mean weighted loss of `model` on `count` draws from a generator seeded
/// by `seed`. The same seed gives the same draws, so successive calls track
/// progress without sampling noise. Iterative slots use the blur surrogate.
pub fn validation_loss<T: Real>(
    model: &TinyDenoiser<T>,
    videos: &[Vec<SourceView<T>>],
    config: &TrainConfig,
    count: usize,
    seed: u64,
) -> Result<f64> {
    if count == 0 || videos.is_empty() || videos.iter().any(|v| v.len() < 2) {
        return Err(Error::InvalidArgument(
            "validation needs draws and videos with at least two frames".into(),
        ));
    }
    let schedule = NoiseSchedule::<T>::karras(config.schedule)?;
    let blur = config.blur()?;
    let extractor = config.extractor::<T>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..count {
        let sample = draw_sample(
            videos, model, &extractor, config, &schedule, &blur, true, &mut rng,
        )?;
        let weight = T::lit(config.weighting.weight(sample.sigma.to_f64_lossy()));
        let eps_hat = model.predict_noise(&sample.noisy, sample.sigma, &sample.cond)?;
        let err = eps_hat.mean_squared_error(&sample.eps)?;
        total += (weight * err).to_f64_lossy();
    }
    Ok(total / count as f64)
}

/// Trains a seeded [`TinyDenoiser`] on videos of posed RGB-D frames.
///
/// Each sample picks a random video, an ordered pair of distinct frames, a
/// schedule index uniformly in `0..=T` and fresh Gaussian noise. All draws
/// come from one generator seeded by `config.seed`, so runs are reproducible.
pub fn train_denoiser<T: Real>(
    videos: &[Vec<SourceView<T>>],
    config: &TrainConfig,
    mut on_step: impl FnMut(usize, f64, &TinyDenoiser<T>) -> Result<()>,
) -> Result<(TinyDenoiser<T>, TrainReport)> {
    config.validate()?;
    let mut model = TinyDenoiser::seeded(&config.architecture, config.seed)?;
    let mut report = TrainReport::default();
    if config.steps == 0 {
        return Ok((model, report));
    }
    if videos.is_empty() || videos.iter().any(|v| v.len() < 2) {
        return Err(Error::InvalidArgument(
            "training needs videos with at least two frames".into(),
        ));
    }
    let schedule = NoiseSchedule::<T>::karras(config.schedule)?;
    let blur = config.blur()?;
    let extractor = config.extractor::<T>();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7EA1_7EA1);
    let mut opt = Optimizer::new(config.optimizer);
    let iter_start = config.iter_start();
    let inv_batch = T::lit(1.0 / config.batch_size as f64);

    for step in 0..config.steps {
        let mut grads = model.net().zero_grad();
        let mut proj_grad = vec![T::zero(); model.projector().weight().len()];
        let mut loss = 0.0;
        for _ in 0..config.batch_size {
            let sample = draw_sample(
                videos,
                &model,
                &extractor,
                config,
                &schedule,
                &blur,
                step >= iter_start,
                &mut rng,
            )?;
            let weight = T::lit(config.weighting.weight(sample.sigma.to_f64_lossy()));
            let (eval, pg) = sample_gradients(&model, &sample, weight)?;
            loss += eval.loss.to_f64_lossy();
            for (acc, g) in grads.iter_mut().zip(&eval.grads) {
                acc.weights
                    .iter_mut()
                    .zip(&g.weights)
                    .for_each(|(a, &b)| *a += b * inv_batch);
                acc.biases
                    .iter_mut()
                    .zip(&g.biases)
                    .for_each(|(a, &b)| *a += b * inv_batch);
            }
            proj_grad
                .iter_mut()
                .zip(&pg)
                .for_each(|(a, &b)| *a += b * inv_batch);
        }
        loss /= config.batch_size as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence { step, loss });
        }
        let mut slices = grad_slices(&grads);
        if config.train_projector {
            slices.push(&proj_grad);
        }
        let (net, projector) = model.parts_mut();
        let mut params = net.param_slices_mut();
        if config.train_projector {
            params.push(projector);
        }
        opt.apply(params, &slices);
        if !model.is_finite() {
            return Err(Error::Divergence { step, loss });
        }
        report.losses.push(loss);
        on_step(step, loss, &model)?;
    }
    Ok((model, report))
}

/// Renders each scene with `views` and trains on the result.
pub fn train_on_scenes<T: Real>(
    scenes: &[SceneSpec],
    views: &ViewSampling,
    config: &TrainConfig,
) -> Result<(TinyDenoiser<T>, TrainReport)> {
    if scenes.is_empty() && config.steps > 0 {
        return Err(Error::InvalidArgument(
            "training needs at least one scene".into(),
        ));
    }
    let videos = scenes
        .iter()
        .map(|s| views.render(s))
        .collect::<Result<Vec<_>>>()?;
    train_denoiser(&videos, config, |_, _, _| Ok(()))
}

/// Scenes `random_scene(base + i)` for `i` in `0..count`.
pub fn scene_set(base: u64, count: usize) -> Vec<SceneSpec> {
    (0..count as u64)
        .map(|i| random_scene(base.wrapping_add(i)))
        .collect()
}
