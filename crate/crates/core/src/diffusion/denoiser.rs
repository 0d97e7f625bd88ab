use super::conditioning::ConditioningBundle;
use crate::error::{Error, Result};
use crate::geometry::FeatureImage;
use crate::scalar::Real;

/// Noise predictor `eps(x, sigma, cond)`.
pub trait Denoiser<T: Real>: Send + Sync {
    fn predict_noise(
        &self,
        x: &FeatureImage<T>,
        sigma: T,
        cond: &ConditioningBundle<T>,
    ) -> Result<FeatureImage<T>>;
}

/// Exact noise predictor for data distributed per pixel as `N(mean, variance)`.
///
/// Under `x = x0 + sigma * eps` the posterior mean of `x0` is
/// `mean + v / (v + sigma²) (x - mean)`, so the optimal prediction is
/// `eps = sigma (x - mean) / (v + sigma²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianOracleDenoiser<T> {
    mean: FeatureImage<T>,
    variance: FeatureImage<T>,
}

impl<T: Real> GaussianOracleDenoiser<T> {
    pub fn new(mean: FeatureImage<T>, variance: FeatureImage<T>) -> Result<Self> {
        mean.ensure_shape(&variance)?;
        mean.ensure_finite("oracle mean")?;
        if !variance
            .data()
            .iter()
            .all(|&v| v > T::zero() && v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "oracle variances must be positive".into(),
            ));
        }
        Ok(GaussianOracleDenoiser { mean, variance })
    }

    pub fn isotropic(mean: FeatureImage<T>, variance: T) -> Result<Self> {
        let (h, w, c) = mean.shape();
        Self::new(mean, FeatureImage::filled(h, w, c, variance))
    }

    pub fn mean(&self) -> &FeatureImage<T> {
        &self.mean
    }

    pub fn variance(&self) -> &FeatureImage<T> {
        &self.variance
    }

    /// Closed-form posterior mean of `x0` given `x` at noise `sigma`.
    pub fn posterior_mean(&self, x: &FeatureImage<T>, sigma: T) -> Result<FeatureImage<T>> {
        x.ensure_shape(&self.mean)?;
        let s2 = sigma * sigma;
        let mut out = x.clone();
        for ((o, &m), &v) in out
            .data_mut()
            .iter_mut()
            .zip(self.mean.data())
            .zip(self.variance.data())
        {
            *o = m + v / (v + s2) * (*o - m);
        }
        Ok(out)
    }
}

impl<T: Real> Denoiser<T> for GaussianOracleDenoiser<T> {
    fn predict_noise(
        &self,
        x: &FeatureImage<T>,
        sigma: T,
        _cond: &ConditioningBundle<T>,
    ) -> Result<FeatureImage<T>> {
        x.ensure_shape(&self.mean)?;
        let s2 = sigma * sigma;
        let mut out = x.clone();
        for ((o, &m), &v) in out
            .data_mut()
            .iter_mut()
            .zip(self.mean.data())
            .zip(self.variance.data())
        {
            *o = sigma * (*o - m) / (v + s2);
        }
        Ok(out)
    }
}

/// Always predicts zero noise.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroDenoiser;

impl<T: Real> Denoiser<T> for ZeroDenoiser {
    fn predict_noise(
        &self,
        x: &FeatureImage<T>,
        _sigma: T,
        _cond: &ConditioningBundle<T>,
    ) -> Result<FeatureImage<T>> {
        let (h, w, c) = x.shape();
        Ok(FeatureImage::zeros(h, w, c))
    }
}
