//! Per-frame sharpness score, its temporal mean, and start/end drift.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::geometry::FeatureImage;
use crate::scalar::Real;

/// Mean forward-difference gradient magnitude over pixels that have both a
/// right and a lower neighbor, averaged over channels. Zero for constant images.
pub fn frame_quality<T: Real>(img: &FeatureImage<T>) -> T {
    let (h, w, c) = img.shape();
    if h < 2 || w < 2 {
        return T::zero();
    }
    let mut total = T::zero();
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            for ch in 0..c {
                let v = img.get(y, x, ch);
                let gx = img.get(y, x + 1, ch) - v;
                let gy = img.get(y + 1, x, ch) - v;
                total += (gx * gx + gy * gy).sqrt();
            }
        }
    }
    total / T::lit(((h - 1) * (w - 1) * c) as f64)
}

/// Ordered frames of one video at a shared resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoFrames<T> {
    frames: Vec<FeatureImage<T>>,
}

impl<T: Real> VideoFrames<T> {
    pub fn new(frames: Vec<FeatureImage<T>>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("a video needs at least one frame".into()))?;
        for f in &frames {
            f.ensure_shape(first)?;
            f.ensure_channels(3)?;
            f.ensure_finite("video frame")?;
        }
        Ok(VideoFrames { frames })
    }

    pub fn frames(&self) -> &[FeatureImage<T>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn qualities(&self) -> Vec<T> {
        self.frames.iter().map(frame_quality).collect()
    }
}

fn mean<T: Real>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::lit(values.len() as f64)
}

/// Mean frame quality over the whole video.
pub fn video_quality<T: Real>(video: &VideoFrames<T>) -> T {
    mean(&video.qualities())
}

/// Zero-based frame ranges of the leading and trailing 15%.
///
/// With one-based frames `1..=n` these are `1..=floor(0.15 n)` and
/// `ceil(0.85 n)..=n`; each is widened to at least one frame.
pub fn drift_slices(n: usize) -> (Range<usize>, Range<usize>) {
    let head_end = (15 * n / 100).max(1).min(n);
    let tail_start = (85 * n).div_ceil(100).clamp(1, n);
    (0..head_end, tail_start - 1..n)
}

/// `|M(start) - M(end)|` from precomputed per-frame qualities.
pub fn drift_from_qualities<T: Real>(qualities: &[T]) -> Result<T> {
    if qualities.len() < 2 {
        return Err(Error::InvalidArgument(
            "drift needs at least two frames".into(),
        ));
    }
    let (head, tail) = drift_slices(qualities.len());
    Ok((mean(&qualities[head]) - mean(&qualities[tail])).abs())
}

pub fn quality_drift<T: Real>(video: &VideoFrames<T>) -> Result<T> {
    drift_from_qualities(&video.qualities())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::gaussian_blur;

    fn edge(height: f64) -> FeatureImage<f64> {
        FeatureImage::from_fn(8, 8, 3, |_, x, _| if x >= 4 { height } else { 0.0 })
    }

    fn textured(seed: usize) -> FeatureImage<f64> {
        FeatureImage::from_fn(12, 12, 3, |y, x, c| {
            (((y * 7 + x * 13 + c * 5 + seed) % 11) as f64) / 10.0
        })
    }

    #[test]
    fn constant_scores_zero() {
        assert_eq!(
            frame_quality(&FeatureImage::<f64>::filled(5, 5, 3, 0.7)),
            0.0
        );
    }

    #[test]
    fn edge_score_is_linear_in_height() {
        let a = frame_quality(&edge(0.4));
        let b = frame_quality(&edge(0.8));
        assert!(a > 0.0);
        assert!((b - 2.0 * a).abs() < 1e-12);
        // one column of unit jumps among 7 columns
        assert!((a - 0.4 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn blur_lowers_quality() {
        let img = textured(0);
        let blurred = gaussian_blur(&img, 2.0, 13).unwrap();
        assert!(frame_quality(&blurred) < frame_quality(&img));
    }

    #[test]
    fn slice_bounds() {
        assert_eq!(drift_slices(100), (0..15, 84..100));
        assert_eq!(drift_slices(20), (0..3, 16..20));
        assert_eq!(drift_slices(2), (0..1, 1..2));
        assert_eq!(drift_slices(6), (0..1, 5..6));
        assert_eq!(drift_slices(7), (0..1, 5..7));
    }

    #[test]
    fn video_quality_is_mean() {
        let v = VideoFrames::new(vec![edge(0.2), edge(0.6)]).unwrap();
        let expect = (frame_quality(&edge(0.2)) + frame_quality(&edge(0.6))) / 2.0;
        assert!((video_quality(&v) - expect).abs() < 1e-15);
        let same = VideoFrames::new(vec![edge(0.3); 4]).unwrap();
        assert_eq!(video_quality(&same), frame_quality(&edge(0.3)));
    }

    #[test]
    fn constant_video_has_no_drift() {
        let v = VideoFrames::new(vec![textured(1); 10]).unwrap();
        assert_eq!(quality_drift(&v).unwrap(), 0.0);
    }

    #[test]
    fn blurred_tail_drifts() {
        let sharp = textured(2);
        let soft = gaussian_blur(&sharp, 3.0, 19).unwrap();
        let mut frames = vec![sharp; 20];
        for f in frames.iter_mut().skip(17) {
            *f = soft.clone();
        }
        let v = VideoFrames::new(frames).unwrap();
        assert!(quality_drift(&v).unwrap() > 0.0);
    }

    #[test]
    fn rejects_mixed_resolution() {
        assert!(VideoFrames::new(vec![edge(0.1), FeatureImage::zeros(4, 4, 3)]).is_err());
    }
}
