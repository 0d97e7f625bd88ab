use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::FeatureImage;
use crate::scalar::Real;

/// Width of the projected semantic features.
pub const DEFAULT_PROJECTED_DIM: usize = 32;

/// Per-pixel ℓ2 norms below this map to the zero vector.
pub const ZERO_NORM_GUARD: f64 = 1e-12;

/// Linear 1x1 channel projection from `input_dim` to `output_dim` channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelProjector<T> {
    input_dim: usize,
    output_dim: usize,
    /// `[input][output]`, row-major.
    weight: Vec<T>,
}

impl<T: Real> ChannelProjector<T> {
    pub fn new(input_dim: usize, output_dim: usize, weight: Vec<T>) -> Result<Self> {
        if output_dim == 0 || output_dim >= input_dim {
            return Err(Error::InvalidArgument(format!(
                "projection must shrink channels: {input_dim} -> {output_dim}"
            )));
        }
        if weight.len() != input_dim * output_dim {
            return Err(Error::shape(
                format!("{input_dim}x{output_dim} weights"),
                weight.len().to_string(),
            ));
        }
        if !weight.iter().all(|w| w.is_finite()) {
            return Err(Error::NonFinite("projector weights".into()));
        }
        Ok(ChannelProjector {
            input_dim,
            output_dim,
            weight,
        })
    }

    /// Gaussian weights with standard deviation `1 / sqrt(input_dim)`.
    pub fn seeded(input_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (input_dim as f64).sqrt();
        let weight = (0..input_dim * output_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z * scale)
            })
            .collect();
        Self::new(input_dim, output_dim, weight)
    }

    /// `W[i][j] = 1` when `i == j`, zero otherwise.
    pub fn truncating(input_dim: usize, output_dim: usize) -> Result<Self> {
        let weight = (0..input_dim * output_dim)
            .map(|k| {
                if k / output_dim == k % output_dim {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        Self::new(input_dim, output_dim, weight)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn weight(&self) -> &[T] {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut [T] {
        &mut self.weight
    }

    /// `dst = Wᵀ src` for one pixel.
    pub fn apply_pixel(&self, src: &[T], dst: &mut [T]) {
        dst.iter_mut().for_each(|d| *d = T::zero());
        for (i, &s) in src.iter().enumerate() {
            if s == T::zero() {
                continue;
            }
            let row = &self.weight[i * self.output_dim..(i + 1) * self.output_dim];
            for (d, &w) in dst.iter_mut().zip(row) {
                *d += s * w;
            }
        }
    }

    pub fn apply(&self, feat: &FeatureImage<T>) -> Result<FeatureImage<T>> {
        feat.ensure_channels(self.input_dim)?;
        let mut out = FeatureImage::zeros(feat.height(), feat.width(), self.output_dim);
        for (src, dst) in feat
            .pixels()
            .zip(out.data_mut().chunks_exact_mut(self.output_dim))
        {
            self.apply_pixel(src, dst);
        }
        Ok(out)
    }
}

/// Divides every pixel's channel vector by its ℓ2 norm; near-zero vectors stay zero.
pub fn l2_normalize<T: Real>(feat: &FeatureImage<T>) -> FeatureImage<T> {
    let mut out = feat.clone();
    let c = feat.channels();
    let guard = T::lit(ZERO_NORM_GUARD);
    for px in out.data_mut().chunks_exact_mut(c) {
        let norm = px.iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm < guard {
            px.iter_mut().for_each(|v| *v = T::zero());
        } else {
            px.iter_mut().for_each(|v| *v /= norm);
        }
    }
    out
}

/// ℓ2-normalize along channels, then apply the projection.
pub fn normalize_project<T: Real>(
    feat: &FeatureImage<T>,
    proj: &ChannelProjector<T>,
) -> Result<FeatureImage<T>> {
    feat.ensure_channels(proj.input_dim())?;
    proj.apply(&l2_normalize(feat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncating_projector_halves_norm_two_vector() {
        let proj = ChannelProjector::<f64>::truncating(4, 2).unwrap();
        let feat = FeatureImage::from_vec(1, 1, 4, vec![2.0 * 0.6, 2.0 * 0.8, 0.0, 0.0]).unwrap();
        let v = feat.pixel(0, 0).to_vec();
        let out = normalize_project(&feat, &proj).unwrap();
        assert!((out.get(0, 0, 0) - v[0] / 2.0).abs() < 1e-15);
        assert!((out.get(0, 0, 1) - v[1] / 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_pixels_stay_zero() {
        let proj = ChannelProjector::<f64>::seeded(6, 3, 9).unwrap();
        let feat = FeatureImage::zeros(2, 2, 6);
        let out = normalize_project(&feat, &proj).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_two_step_reference() {
        let proj = ChannelProjector::<f64>::seeded(8, 3, 1).unwrap();
        let feat =
            FeatureImage::from_fn(3, 2, 8, |y, x, c| ((y * 17 + x * 5 + c * 3) as f64).cos());
        let out = normalize_project(&feat, &proj).unwrap();
        for y in 0..3 {
            for x in 0..2 {
                let v = feat.pixel(y, x);
                let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                for j in 0..3 {
                    let expect: f64 = (0..8).map(|i| v[i] / n * proj.weight()[i * 3 + j]).sum();
                    assert!((out.get(y, x, j) - expect).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn validates_dims() {
        assert!(ChannelProjector::<f64>::seeded(4, 4, 0).is_err());
        let proj = ChannelProjector::<f64>::seeded(4, 2, 0).unwrap();
        assert!(normalize_project(&FeatureImage::zeros(1, 1, 5), &proj).is_err());
    }
}
