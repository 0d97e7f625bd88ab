use super::linalg::Vec3;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// 3D points carrying one feature vector each.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePointCloud<T> {
    positions: Vec<Vec3<T>>,
    channels: usize,
    features: Vec<T>,
}

impl<T: Real> FeaturePointCloud<T> {
    pub fn empty(channels: usize) -> Self {
        assert!(channels >= 1, "point features need at least one channel");
        FeaturePointCloud {
            positions: Vec::new(),
            channels,
            features: Vec::new(),
        }
    }

    /// `features` is `positions.len() x channels`, row-major.
    pub fn new(positions: Vec<Vec3<T>>, channels: usize, features: Vec<T>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidArgument(
                "point features need at least one channel".into(),
            ));
        }
        if features.len() != positions.len() * channels {
            return Err(Error::shape(
                format!("{} feature values", positions.len() * channels),
                format!("{}", features.len()),
            ));
        }
        if !positions.iter().all(Vec3::is_finite) || !features.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("point cloud".into()));
        }
        Ok(FeaturePointCloud {
            positions,
            channels,
            features,
        })
    }

    pub fn push(&mut self, position: Vec3<T>, feature: &[T]) {
        debug_assert_eq!(feature.len(), self.channels);
        self.positions.push(position);
        self.features.extend_from_slice(feature);
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn positions(&self) -> &[Vec3<T>] {
        &self.positions
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[T] {
        &self.features[i * self.channels..(i + 1) * self.channels]
    }

    /// Maps every position through `x -> A x + b`.
    pub fn transformed(&self, f: impl Fn(&Vec3<T>) -> Vec3<T>) -> Self {
        FeaturePointCloud {
            positions: self.positions.iter().map(f).collect(),
            channels: self.channels,
            features: self.features.clone(),
        }
    }
}
