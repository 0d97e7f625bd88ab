use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::conditioning::{ConditioningBundle, ConditioningMode};
use super::denoiser::Denoiser;
use super::schedule::NoiseSchedule;
use super::warp::{LiftedSource, SourceView, WarpedTarget};
use crate::error::{Error, Result};
use crate::features::{ChannelProjector, FeatureExtractor};
use crate::geometry::{Camera, FeatureImage, RenderMask};
use crate::scalar::Real;

/// Sample `x` at schedule index `step`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionState<T> {
    pub x: FeatureImage<T>,
    pub step: usize,
    pub sigma: T,
}

impl<T: Real> DiffusionState<T> {
    /// `x = sigma_max * noise` at step 0.
    pub fn initial(schedule: &NoiseSchedule<T>, noise: &FeatureImage<T>) -> Self {
        let s = schedule.sigma_max();
        DiffusionState {
            x: noise.map(|n| s * n),
            step: 0,
            sigma: s,
        }
    }
}

/// `x_t = x_0 + sigma * noise`.
pub fn forward_noise<T: Real>(
    x0: &FeatureImage<T>,
    sigma: T,
    noise: &FeatureImage<T>,
) -> Result<FeatureImage<T>> {
    if !(sigma >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be non-negative, got {sigma}"
        )));
    }
    x0.zip_map(noise, |x, n| x + sigma * n)
}

/// Standard normal image drawn from `rng`.
pub fn gaussian_image<T: Real>(
    rng: &mut impl rand::Rng,
    height: usize,
    width: usize,
    channels: usize,
) -> FeatureImage<T> {
    let data = (0..height * width * channels)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(z)
        })
        .collect();
    FeatureImage::from_vec(height, width, channels, data).expect("sized to fit")
}

fn predict_checked<T: Real>(
    denoiser: &dyn Denoiser<T>,
    x: &FeatureImage<T>,
    sigma: T,
    cond: &ConditioningBundle<T>,
) -> Result<FeatureImage<T>> {
    let eps = denoiser.predict_noise(x, sigma, cond)?;
    x.ensure_shape(&eps)?;
    eps.ensure_finite("predicted noise")?;
    Ok(eps)
}

/// `x - sigma * eps`.
pub fn estimate_from_noise<T: Real>(
    x: &FeatureImage<T>,
    sigma: T,
    eps: &FeatureImage<T>,
) -> Result<FeatureImage<T>> {
    x.zip_map(eps, |x, e| x - sigma * e)
}

/// One-step clean estimate `x_t - sigma_t * eps(x_t, sigma_t, c)`.
pub fn denoised_estimate<T: Real>(
    state: &DiffusionState<T>,
    denoiser: &dyn Denoiser<T>,
    cond: &ConditioningBundle<T>,
) -> Result<FeatureImage<T>> {
    let eps = predict_checked(denoiser, &state.x, state.sigma, cond)?;
    estimate_from_noise(&state.x, state.sigma, &eps)
}

/// Euler update `x + (sigma_next - sigma) * eps`.
pub fn euler_update<T: Real>(
    x: &FeatureImage<T>,
    eps: &FeatureImage<T>,
    sigma: T,
    sigma_next: T,
) -> Result<FeatureImage<T>> {
    let k = sigma_next - sigma;
    x.zip_map(eps, |x, e| x + k * e)
}

/// The same update written as `x̂0 + sigma_next * eps`.
pub fn euler_update_via_estimate<T: Real>(
    x: &FeatureImage<T>,
    eps: &FeatureImage<T>,
    sigma: T,
    sigma_next: T,
) -> Result<FeatureImage<T>> {
    let x0 = estimate_from_noise(x, sigma, eps)?;
    x0.zip_map(eps, |x0, e| x0 + sigma_next * e)
}

fn advance<T: Real>(
    state: &DiffusionState<T>,
    eps: &FeatureImage<T>,
    schedule: &NoiseSchedule<T>,
) -> Result<DiffusionState<T>> {
    if state.step >= schedule.steps() {
        return Err(Error::InvalidArgument(format!(
            "cannot step past the final index {}",
            schedule.steps()
        )));
    }
    let next = schedule.sigma(state.step + 1);
    Ok(DiffusionState {
        x: euler_update(&state.x, eps, state.sigma, next)?,
        step: state.step + 1,
        sigma: next,
    })
}

/// Advances the state one index toward `sigma_min`.
pub fn euler_step<T: Real>(
    state: &DiffusionState<T>,
    denoiser: &dyn Denoiser<T>,
    cond: &ConditioningBundle<T>,
    schedule: &NoiseSchedule<T>,
) -> Result<DiffusionState<T>> {
    if state.step >= schedule.steps() {
        return Err(Error::InvalidArgument(format!(
            "cannot step past the final index {}",
            schedule.steps()
        )));
    }
    let eps = predict_checked(denoiser, &state.x, state.sigma, cond)?;
    advance(state, &eps, schedule)
}

/// Result for one target camera.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSample<T> {
    pub image: FeatureImage<T>,
    pub mask: RenderMask,
    /// `(step, x̂0)` snapshots when recording was requested.
    pub intermediates: Vec<(usize, FeatureImage<T>)>,
}

/// Generates target frames from a single posed RGB-D view.
///
/// Frames are independent: frame `j` draws its noise from `seed + j` and sees
/// only the source view, so frames may run in parallel without changing results.
pub struct TrajectorySampler<'a, T: Real> {
    pub denoiser: &'a dyn Denoiser<T>,
    pub schedule: &'a NoiseSchedule<T>,
    pub mode: ConditioningMode,
    pub extractor: &'a dyn FeatureExtractor<T>,
    pub projector: &'a ChannelProjector<T>,
    /// Run frames on the rayon pool; `false` is the sequential reference path.
    pub parallel: bool,
    /// Keep `x̂0` every this many steps.
    pub record_every: Option<usize>,
}

impl<T: Real> TrajectorySampler<'_, T> {
    pub fn sample(
        &self,
        view: &SourceView<T>,
        targets: &[Camera<T>],
        seed: u64,
    ) -> Result<Vec<FrameSample<T>>> {
        if targets.is_empty() {
            return Err(Error::InvalidArgument("no target cameras".into()));
        }
        view.camera.validate()?;
        for cam in targets {
            cam.validate()?;
        }
        let source = LiftedSource::new(view, self.mode, self.extractor)?;
        let run = |(j, cam): (usize, &Camera<T>)| {
            self.sample_frame(&source, cam, seed.wrapping_add(j as u64))
        };
        if self.parallel {
            targets.par_iter().enumerate().map(run).collect()
        } else {
            targets.iter().enumerate().map(run).collect()
        }
    }

    fn sample_frame(
        &self,
        source: &LiftedSource<T>,
        cam: &Camera<T>,
        seed: u64,
    ) -> Result<FrameSample<T>> {
        let warped = WarpedTarget::new(source, cam, self.projector)?;
        let mut cond = warped.initial_bundle(self.mode);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = gaussian_image(&mut rng, cam.height, cam.width, 3);
        let mut state = DiffusionState::initial(self.schedule, &noise);
        let mut intermediates = Vec::new();

        for step in 0..self.schedule.steps() {
            let eps = predict_checked(self.denoiser, &state.x, state.sigma, &cond)?;
            let needs_estimate = self.mode.is_iterative() || self.record_every.is_some();
            if needs_estimate {
                let estimate = estimate_from_noise(&state.x, state.sigma, &eps)?;
                if self.mode.is_iterative() {
                    warped.refresh_iterative(
                        &mut cond,
                        &estimate,
                        self.extractor,
                        self.projector,
                    )?;
                }
                if let Some(every) = self.record_every {
                    if step % every.max(1) == 0 {
                        intermediates.push((step, estimate));
                    }
                }
            }
            state = advance(&state, &eps, self.schedule)?;
        }
        let image = denoised_estimate(&state, self.denoiser, &cond)?;
        Ok(FrameSample {
            image,
            mask: warped.mask,
            intermediates,
        })
    }
}

/// Convenience wrapper returning only the final frames.
#[allow(clippy::too_many_arguments)]
pub fn sample_trajectory<T: Real>(
    view: &SourceView<T>,
    targets: &[Camera<T>],
    denoiser: &dyn Denoiser<T>,
    schedule: &NoiseSchedule<T>,
    mode: ConditioningMode,
    extractor: &dyn FeatureExtractor<T>,
    projector: &ChannelProjector<T>,
    seed: u64,
) -> Result<Vec<FeatureImage<T>>> {
    let sampler = TrajectorySampler {
        denoiser,
        schedule,
        mode,
        extractor,
        projector,
        parallel: false,
        record_every: None,
    };
    Ok(sampler
        .sample(view, targets, seed)?
        .into_iter()
        .map(|f| f.image)
        .collect())
}
