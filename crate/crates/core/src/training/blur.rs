//! Timestep-dependent Gaussian blur standing in for intermediate estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FeatureImage;
use crate::scalar::Real;

pub const DEFAULT_TAU_MIN: f64 = 0.1;
pub const DEFAULT_TAU_MAX: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlurSchedule {
    pub tau_min: f64,
    pub tau_max: f64,
    pub steps: usize,
}

impl BlurSchedule {
    pub fn new(tau_min: f64, tau_max: f64, steps: usize) -> Result<Self> {
        let s = BlurSchedule {
            tau_min,
            tau_max,
            steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_steps(steps: usize) -> Result<Self> {
        Self::new(DEFAULT_TAU_MIN, DEFAULT_TAU_MAX, steps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_min > 0.0 && self.tau_min <= self.tau_max && self.tau_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "blur needs 0 < tau_min <= tau_max, got {} and {}",
                self.tau_min, self.tau_max
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument(
                "blur schedule needs at least one step".into(),
            ));
        }
        Ok(())
    }
}

/// `tau_min + t/T (tau_max - tau_min)` for `0 <= t <= T`.
pub fn blur_sigma(schedule: &BlurSchedule, t: usize) -> Result<f64> {
    schedule.validate()?;
    if t > schedule.steps {
        return Err(Error::InvalidArgument(format!(
            "blur step {t} outside 0..={}",
            schedule.steps
        )));
    }
    if t == schedule.steps {
        return Ok(schedule.tau_max);
    }
    let frac = t as f64 / schedule.steps as f64;
    Ok(schedule.tau_min + frac * (schedule.tau_max - schedule.tau_min))
}

/// `2 round(3 tau) + 1`.
pub fn blur_kernel_size(tau: f64) -> usize {
    2 * (3.0 * tau).round().max(0.0) as usize + 1
}

/// Normalized 1-D Gaussian taps of odd length `k`.
pub fn gaussian_kernel(tau: f64, k: usize) -> Result<Vec<f64>> {
    if k % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "blur kernel size must be odd, got {k}"
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "blur tau must be positive, got {tau}"
        )));
    }
    let r = (k / 2) as f64;
    let taps: Vec<f64> = (0..k)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * tau * tau)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|v| v / sum).collect())
}

fn blur_axis<T: Real>(img: &FeatureImage<T>, taps: &[T], horizontal: bool) -> FeatureImage<T> {
    let (h, w, c) = img.shape();
    let r = (taps.len() / 2) as isize;
    let mut out = FeatureImage::zeros(h, w, c);
    for y in 0..h {
        for x in 0..w {
            for (i, &wt) in taps.iter().enumerate() {
                let off = i as isize - r;
                let (sy, sx) = if horizontal {
                    (y, (x as isize + off).clamp(0, w as isize - 1) as usize)
                } else {
                    ((y as isize + off).clamp(0, h as isize - 1) as usize, x)
                };
                let src = img.index(sy, sx, 0);
                let dst = out.index(y, x, 0);
                for ch in 0..c {
                    let v = img.data()[src + ch] * wt;
                    out.data_mut()[dst + ch] += v;
                }
            }
        }
    }
    out
}

/// Separable Gaussian blur with replicated borders; `k = 1` returns the input.
pub fn gaussian_blur<T: Real>(
    img: &FeatureImage<T>,
    tau: f64,
    k: usize,
) -> Result<FeatureImage<T>> {
    let taps = gaussian_kernel(tau, k)?;
    if k == 1 {
        return Ok(img.clone());
    }
    let taps: Vec<T> = taps.into_iter().map(T::lit).collect();
    Ok(blur_axis(&blur_axis(img, &taps, true), &taps, false))
}

/// Blur of `x0` matching noise level `t` on the blur schedule.
pub fn blur_at<T: Real>(
    img: &FeatureImage<T>,
    schedule: &BlurSchedule,
    t: usize,
) -> Result<FeatureImage<T>> {
    let tau = blur_sigma(schedule, t)?;
    gaussian_blur(img, tau, blur_kernel_size(tau))
}
