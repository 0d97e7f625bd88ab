use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::FeatureImage;
use crate::scalar::Real;

/// Dense feature extractor: RGB in `[0, 1]` to a same-resolution feature map.
pub trait FeatureExtractor<T: Real>: Send + Sync {
    fn output_channels(&self) -> usize;

    fn extract_unchecked(&self, image: &FeatureImage<T>) -> Result<FeatureImage<T>>;
}

/// Runs `extractor` on an RGB image and checks its output contract.
pub fn extract<T: Real>(
    extractor: &dyn FeatureExtractor<T>,
    image: &FeatureImage<T>,
) -> Result<FeatureImage<T>> {
    image.ensure_channels(3)?;
    image.ensure_finite("extractor input")?;
    let out = extractor.extract_unchecked(image)?;
    if !out.same_spatial(image.height(), image.width()) {
        return Err(Error::shape(
            format!("{}x{}", image.height(), image.width()),
            format!("{}x{} (extractor output)", out.height(), out.width()),
        ));
    }
    out.ensure_channels(extractor.output_channels())?;
    out.ensure_finite("extracted features")?;
    Ok(out)
}

/// Bank of fixed 3x3x3 convolution kernels, stride 1, replicate-edge padding.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyExtractor<T> {
    /// `[k][dy][dx][c]` flattened.
    kernels: Vec<T>,
    count: usize,
}

const TAPS: usize = 27;

impl<T: Real> ToyExtractor<T> {
    pub fn seeded(count: usize, seed: u64) -> Self {
        assert!(count >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (TAPS as f64).sqrt();
        let kernels = (0..count * TAPS)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z * scale)
            })
            .collect();
        ToyExtractor { kernels, count }
    }

    /// `kernels[k][dy][dx][c]`.
    pub fn from_kernels(kernels: Vec<[[[T; 3]; 3]; 3]>) -> Self {
        let count = kernels.len();
        assert!(count >= 1);
        let flat = kernels
            .into_iter()
            .flat_map(|k| k.into_iter().flatten().flatten())
            .collect();
        ToyExtractor {
            kernels: flat,
            count,
        }
    }

    pub fn kernel_count(&self) -> usize {
        self.count
    }
}

impl<T: Real> FeatureExtractor<T> for ToyExtractor<T> {
    fn output_channels(&self) -> usize {
        self.count
    }

    fn extract_unchecked(&self, image: &FeatureImage<T>) -> Result<FeatureImage<T>> {
        image.ensure_channels(3)?;
        let (h, w) = (image.height(), image.width());
        let mut out = FeatureImage::zeros(h, w, self.count);
        let mut patch = [T::zero(); TAPS];
        for y in 0..h {
            for x in 0..w {
                for dy in 0..3 {
                    let sy = (y + dy).saturating_sub(1).min(h - 1);
                    for dx in 0..3 {
                        let sx = (x + dx).saturating_sub(1).min(w - 1);
                        let src = image.pixel(sy, sx);
                        patch[(dy * 3 + dx) * 3..(dy * 3 + dx) * 3 + 3].copy_from_slice(src);
                    }
                }
                let dst = out.pixel_mut(y, x);
                for (k, kernel) in self.kernels.chunks_exact(TAPS).enumerate() {
                    dst[k] = kernel.iter().zip(&patch).map(|(&a, &b)| a * b).sum();
                }
            }
        }
        Ok(out)
    }
}

/// Serves feature maps computed elsewhere (for example by a real vision
/// backbone) for images it has seen, falling back to `fallback` otherwise.
pub struct PrecomputedExtractor<T: Real> {
    entries: Vec<(FeatureImage<T>, FeatureImage<T>)>,
    channels: usize,
    fallback: Option<Box<dyn FeatureExtractor<T>>>,
}

impl<T: Real> PrecomputedExtractor<T> {
    pub fn new(
        entries: Vec<(FeatureImage<T>, FeatureImage<T>)>,
        fallback: Option<Box<dyn FeatureExtractor<T>>>,
    ) -> Result<Self> {
        let channels = match (entries.first(), &fallback) {
            (Some((_, f)), _) => f.channels(),
            (None, Some(fb)) => fb.output_channels(),
            (None, None) => {
                return Err(Error::InvalidArgument(
                    "no precomputed features and no fallback".into(),
                ))
            }
        };
        for (img, feat) in &entries {
            feat.ensure_channels(channels)?;
            if !feat.same_spatial(img.height(), img.width()) {
                return Err(Error::shape(
                    format!("{}x{}", img.height(), img.width()),
                    format!("{}x{}", feat.height(), feat.width()),
                ));
            }
        }
        if let Some(fb) = &fallback {
            if fb.output_channels() != channels {
                return Err(Error::shape(
                    format!("{channels} fallback channels"),
                    fb.output_channels().to_string(),
                ));
            }
        }
        Ok(PrecomputedExtractor {
            entries,
            channels,
            fallback,
        })
    }

    /// Loads every `<name>.feat.fimg` in `dir` paired with the RGB frame
    /// `<name>.fimg` (or `<name>.png`).
    pub fn from_dir(
        dir: impl AsRef<Path>,
        fallback: Option<Box<dyn FeatureExtractor<T>>>,
    ) -> Result<Self> {
        let dir = dir.as_ref();
        let mut names: Vec<String> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                e.file_name()
                    .to_str()
                    .and_then(|n| n.strip_suffix(".feat.fimg"))
                    .map(str::to_string)
            })
            .collect();
        names.sort();
        let mut entries = Vec::with_capacity(names.len());
        for name in names {
            let rgb = crate::io::read_frame(dir, &name)?;
            let feat = crate::io::read_fimg(dir.join(format!("{name}.feat.fimg")))?;
            entries.push((rgb, feat));
        }
        Self::new(entries, fallback)
    }
}

impl<T: Real> FeatureExtractor<T> for PrecomputedExtractor<T> {
    fn output_channels(&self) -> usize {
        self.channels
    }

    fn extract_unchecked(&self, image: &FeatureImage<T>) -> Result<FeatureImage<T>> {
        if let Some((_, feat)) = self.entries.iter().find(|(img, _)| img == image) {
            return Ok(feat.clone());
        }
        match &self.fallback {
            Some(fb) => fb.extract_unchecked(image),
            None => Err(Error::InvalidArgument(
                "image has no precomputed features and no fallback extractor is set".into(),
            )),
        }
    }
}
