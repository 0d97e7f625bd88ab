//! Builds per-target conditioning by warping the source view.

use super::conditioning::{ConditioningBundle, ConditioningMode};
use crate::error::Result;
use crate::features::{extract, fuse_features, l2_normalize, ChannelProjector, FeatureExtractor};
use crate::geometry::{
    lift_view, plucker_ray_map, splat_features, Camera, FeatureImage, FeaturePointCloud, RenderMask,
};
use crate::scalar::Real;

/// A posed RGB-D input view.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceView<T> {
    pub rgb: FeatureImage<T>,
    /// Planar (camera z) depth, `+inf` where nothing was hit.
    pub depth: FeatureImage<T>,
    pub camera: Camera<T>,
}

/// Source view lifted to a cloud carrying RGB and, when needed, raw features.
#[derive(Clone, Debug)]
pub struct LiftedSource<T> {
    pub cloud: FeaturePointCloud<T>,
    pub feature_channels: usize,
}

impl<T: Real> LiftedSource<T> {
    pub fn new(
        view: &SourceView<T>,
        mode: ConditioningMode,
        extractor: &dyn FeatureExtractor<T>,
    ) -> Result<Self> {
        view.rgb.ensure_channels(3)?;
        if mode.needs_features() {
            let feat = extract(extractor, &view.rgb)?;
            let stacked = FeatureImage::concat_channels(&[&view.rgb, &feat])?;
            Ok(LiftedSource {
                cloud: lift_view(&stacked, &view.depth, &view.camera)?,
                feature_channels: feat.channels(),
            })
        } else {
            Ok(LiftedSource {
                cloud: lift_view(&view.rgb, &view.depth, &view.camera)?,
                feature_channels: 0,
            })
        }
    }
}

/// Signals obtained by warping the source into one target camera.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpedTarget<T> {
    pub ray_map: FeatureImage<T>,
    pub rgb: FeatureImage<T>,
    pub mask: RenderMask,
    /// ℓ2-normalized raw features before projection.
    pub normalized_feat: Option<FeatureImage<T>>,
    /// Projected features.
    pub feat: Option<FeatureImage<T>>,
}

impl<T: Real> WarpedTarget<T> {
    pub fn new(
        source: &LiftedSource<T>,
        cam: &Camera<T>,
        projector: &ChannelProjector<T>,
    ) -> Result<Self> {
        let splat = splat_features(&source.cloud, cam);
        let rgb = splat.features.slice_channels(0, 3)?;
        let (normalized_feat, feat) = if source.feature_channels > 0 {
            let raw = splat.features.slice_channels(3, source.feature_channels)?;
            let normalized = l2_normalize(&raw);
            let projected = projector.apply(&normalized)?;
            (Some(normalized), Some(projected))
        } else {
            (None, None)
        };
        Ok(WarpedTarget {
            ray_map: plucker_ray_map(cam),
            rgb,
            mask: splat.mask,
            normalized_feat,
            feat,
        })
    }

    /// Conditioning for the first step: iterative slots start from the warped signals.
    pub fn initial_bundle(&self, mode: ConditioningMode) -> ConditioningBundle<T> {
        ConditioningBundle {
            mode,
            ray_map: self.ray_map.clone(),
            warped_rgb: mode.uses_warped_rgb().then(|| self.rgb.clone()),
            warped_feat: if mode.uses_warped_feat() {
                self.feat.clone()
            } else {
                None
            },
            iter_rgb: mode.uses_iter_rgb().then(|| self.rgb.clone()),
            iter_feat: if mode.uses_iter_feat() {
                self.feat.clone()
            } else {
                None
            },
            mask: self.mask.clone(),
        }
    }

    /// Fuses the current clean estimate with the warped signals into the
    /// iterative slot of `bundle`.
    pub fn refresh_iterative(
        &self,
        bundle: &mut ConditioningBundle<T>,
        estimate: &FeatureImage<T>,
        extractor: &dyn FeatureExtractor<T>,
        projector: &ChannelProjector<T>,
    ) -> Result<()> {
        if bundle.mode.uses_iter_rgb() {
            bundle.iter_rgb = Some(fuse_features(&self.rgb, estimate, &self.mask)?);
        }
        if bundle.mode.uses_iter_feat() {
            let warped = self
                .feat
                .as_ref()
                .expect("feature modes carry warped features");
            let current = projector.apply(&l2_normalize(&extract(extractor, estimate)?))?;
            bundle.iter_feat = Some(fuse_features(warped, &current, &self.mask)?);
        }
        Ok(())
    }
}
