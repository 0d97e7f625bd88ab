//! Train one denoiser per conditioning mode and score held-out novel views.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::tiny::TinyDenoiser;
use super::trainer::{scene_set, train_denoiser, TrainConfig, ViewSampling};
use crate::diffusion::{
    ConditioningMode, NoiseSchedule, ScheduleConfig, SourceView, TrajectorySampler,
};
use crate::error::{Error, Result};
use crate::metrics::{drift_from_qualities, frame_quality, psnr, ssim};
use crate::scalar::Real;

pub const HELDOUT_SCENE_BASE: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    pub modes: Vec<ConditioningMode>,
    /// Training settings shared by every mode; `train.mode` is overridden.
    pub train: TrainConfig,
    pub views: ViewSampling,
    pub train_scenes: usize,
    /// Scene seeds of the training set start here.
    pub train_scene_base: u64,
    pub heldout_scenes: usize,
    pub heldout_scene_base: u64,
    /// Sampler schedule used for the held-out reconstructions.
    pub eval_schedule: ScheduleConfig,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            modes: ConditioningMode::ALL.to_vec(),
            train: TrainConfig::default(),
            views: ViewSampling::default(),
            train_scenes: 64,
            train_scene_base: 0,
            heldout_scenes: 20,
            heldout_scene_base: HELDOUT_SCENE_BASE,
            eval_schedule: ScheduleConfig::default(),
        }
    }
}

/// Held-out scores of one trained mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: ConditioningMode,
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
    /// Mean quality drift over the generated held-out videos.
    pub drift: f64,
    pub final_loss: f64,
    pub train_seconds: f64,
}

/// Mean reconstruction scores of `model` on held-out videos. Frame 0 of
/// each video is the source; the remaining frames are generated and
/// compared against their renders.
pub fn evaluate_heldout<T: Real>(
    model: &TinyDenoiser<T>,
    config: &TrainConfig,
    mode: ConditioningMode,
    videos: &[Vec<SourceView<T>>],
    schedule: &NoiseSchedule<T>,
    seed: u64,
) -> Result<(f64, f64, f64, f64)> {
    let extractor = config.extractor::<T>();
    let sampler = TrajectorySampler {
        denoiser: model,
        schedule,
        mode,
        extractor: &extractor,
        projector: model.projector(),
        parallel: false,
        record_every: None,
    };
    let (mut mse, mut p, mut s, mut drift, mut n) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for (v, video) in videos.iter().enumerate() {
        if video.len() < 2 {
            return Err(Error::InvalidArgument(
                "held-out videos need at least two frames".into(),
            ));
        }
        let targets: Vec<_> = video[1..].iter().map(|f| f.camera.clone()).collect();
        let frames = sampler.sample(&video[0], &targets, seed.wrapping_add(1000 * v as u64))?;
        let mut q = vec![frame_quality(&video[0].rgb).to_f64_lossy()];
        for (f, gt) in frames.iter().zip(&video[1..]) {
            mse += f.image.mean_squared_error(&gt.rgb)?.to_f64_lossy();
            p += psnr(&f.image, &gt.rgb)?.to_f64_lossy();
            s += ssim(&f.image, &gt.rgb)?.to_f64_lossy();
            q.push(frame_quality(&f.image).to_f64_lossy());
            n += 1;
        }
        drift += drift_from_qualities(&q)?;
    }
    let nf = n as f64;
    Ok((mse / nf, p / nf, s / nf, drift / videos.len() as f64))
}

/// Runs the ablation with `seed` driving initialization, training draws and
/// sampling noise. Scenes come from `config`'s seed ranges.
pub fn run_ablation<T: Real>(
    config: &AblationConfig,
    seed: u64,
    on_row: impl FnMut(&AblationRow),
) -> Result<Vec<AblationRow>> {
    let render = |base: u64, count: usize| -> Result<Vec<Vec<SourceView<T>>>> {
        scene_set(base, count)
            .iter()
            .map(|s| config.views.render(s))
            .collect()
    };
    let train_videos = render(config.train_scene_base, config.train_scenes)?;
    let heldout = render(config.heldout_scene_base, config.heldout_scenes)?;
    run_ablation_on(&train_videos, &heldout, config, seed, on_row)
}

/// [`run_ablation`] on explicit training and held-out videos.
pub fn run_ablation_on<T: Real>(
    train_videos: &[Vec<SourceView<T>>],
    heldout: &[Vec<SourceView<T>>],
    config: &AblationConfig,
    seed: u64,
    mut on_row: impl FnMut(&AblationRow),
) -> Result<Vec<AblationRow>> {
    if config.modes.is_empty() {
        return Err(Error::InvalidArgument(
            "ablation needs at least one mode".into(),
        ));
    }
    if heldout.is_empty() {
        return Err(Error::InvalidArgument(
            "ablation needs held-out videos".into(),
        ));
    }
    let schedule = NoiseSchedule::<T>::karras(config.eval_schedule)?;
    let mut rows = Vec::with_capacity(config.modes.len());
    for &mode in &config.modes {
        let train = TrainConfig {
            mode,
            seed,
            ..config.train.clone()
        };
        let start = Instant::now();
        let (model, report) = train_denoiser(train_videos, &train, |_, _, _| Ok(()))?;
        let train_seconds = start.elapsed().as_secs_f64();
        let (mse, psnr, ssim, drift) =
            evaluate_heldout(&model, &train, mode, heldout, &schedule, seed)?;
        let row = AblationRow {
            mode,
            mse,
            psnr,
            ssim,
            drift,
            final_loss: report.losses.last().copied().unwrap_or(f64::NAN),
            train_seconds,
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}
