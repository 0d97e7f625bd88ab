use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FeatureImage, RenderMask};
use crate::scalar::Real;

/// Which conditioning signals reach the denoiser, mirroring the ablation
/// ladder: each warped mode adds to the previous one; the two iterative
/// modes are alternatives layered on top of `WarpedFeat`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConditioningMode {
    #[serde(rename = "ray")]
    RayOnly,
    #[serde(rename = "warp-rgb")]
    WarpedRgb,
    #[serde(rename = "warp-feat")]
    WarpedFeat,
    #[serde(rename = "iter-rgb")]
    IterativeRgb,
    #[serde(rename = "iter-feat")]
    IterativeFeat,
}

impl ConditioningMode {
    pub const ALL: [ConditioningMode; 5] = [
        ConditioningMode::RayOnly,
        ConditioningMode::WarpedRgb,
        ConditioningMode::WarpedFeat,
        ConditioningMode::IterativeRgb,
        ConditioningMode::IterativeFeat,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ConditioningMode::RayOnly => "ray",
            ConditioningMode::WarpedRgb => "warp-rgb",
            ConditioningMode::WarpedFeat => "warp-feat",
            ConditioningMode::IterativeRgb => "iter-rgb",
            ConditioningMode::IterativeFeat => "iter-feat",
        }
    }

    pub fn uses_warped_rgb(self) -> bool {
        self >= ConditioningMode::WarpedRgb
    }

    pub fn uses_warped_feat(self) -> bool {
        self >= ConditioningMode::WarpedFeat
    }

    pub fn uses_iter_rgb(self) -> bool {
        self == ConditioningMode::IterativeRgb
    }

    pub fn uses_iter_feat(self) -> bool {
        self == ConditioningMode::IterativeFeat
    }

    pub fn is_iterative(self) -> bool {
        self.uses_iter_rgb() || self.uses_iter_feat()
    }

    /// Whether the source view's semantic features must be extracted.
    pub fn needs_features(self) -> bool {
        self.uses_warped_feat()
    }
}

impl fmt::Display for ConditioningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConditioningMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConditioningMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown mode '{s}' (expected ray, warp-rgb, warp-feat, iter-rgb or iter-feat)"
                ))
            })
    }
}

/// Channel layout handed to denoisers: ray map (6), warped RGB (3),
/// warped features (C'), iterative RGB (3), iterative features (C'),
/// mask (1), mode one-hot (5). Absent members are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConditioningLayout {
    pub projected_dim: usize,
}

impl ConditioningLayout {
    pub const RAY: usize = 0;
    pub const WARPED_RGB: usize = 6;
    const FEAT_START: usize = 9;

    pub fn new(projected_dim: usize) -> Self {
        ConditioningLayout { projected_dim }
    }

    pub fn warped_feat(&self) -> usize {
        Self::FEAT_START
    }

    pub fn iter_rgb(&self) -> usize {
        Self::FEAT_START + self.projected_dim
    }

    pub fn iter_feat(&self) -> usize {
        self.iter_rgb() + 3
    }

    pub fn mask(&self) -> usize {
        self.iter_feat() + self.projected_dim
    }

    pub fn mode(&self) -> usize {
        self.mask() + 1
    }

    pub fn channels(&self) -> usize {
        self.mode() + ConditioningMode::ALL.len()
    }
}

/// Everything a denoiser is conditioned on for one target frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditioningBundle<T> {
    pub mode: ConditioningMode,
    pub ray_map: FeatureImage<T>,
    pub warped_rgb: Option<FeatureImage<T>>,
    pub warped_feat: Option<FeatureImage<T>>,
    pub iter_rgb: Option<FeatureImage<T>>,
    pub iter_feat: Option<FeatureImage<T>>,
    pub mask: RenderMask,
}

impl<T: Real> ConditioningBundle<T> {
    /// Ray-map only conditioning with an empty mask.
    pub fn ray_only(ray_map: FeatureImage<T>) -> Self {
        let mask = RenderMask::new(ray_map.height(), ray_map.width(), false);
        ConditioningBundle {
            mode: ConditioningMode::RayOnly,
            ray_map,
            warped_rgb: None,
            warped_feat: None,
            iter_rgb: None,
            iter_feat: None,
            mask,
        }
    }

    pub fn height(&self) -> usize {
        self.ray_map.height()
    }

    pub fn width(&self) -> usize {
        self.ray_map.width()
    }

    pub fn validate(&self) -> Result<()> {
        self.ray_map.ensure_channels(6)?;
        self.mask.ensure_matches(&self.ray_map)?;
        let m = self.mode;
        let slots = [
            ("warped_rgb", &self.warped_rgb, m.uses_warped_rgb()),
            ("warped_feat", &self.warped_feat, m.uses_warped_feat()),
            ("iter_rgb", &self.iter_rgb, m.uses_iter_rgb()),
            ("iter_feat", &self.iter_feat, m.uses_iter_feat()),
        ];
        for (name, slot, wanted) in slots {
            match (slot, wanted) {
                (Some(img), true) => self.mask.ensure_matches(img)?,
                (None, false) => {}
                (Some(_), false) => {
                    return Err(Error::InvalidArgument(format!(
                        "mode {m} does not use {name}"
                    )))
                }
                (None, true) => {
                    return Err(Error::InvalidArgument(format!("mode {m} requires {name}")))
                }
            }
        }
        if let (Some(w), Some(i)) = (&self.warped_feat, &self.iter_feat) {
            w.ensure_shape(i)?;
        }
        for rgb in [&self.warped_rgb, &self.iter_rgb].into_iter().flatten() {
            rgb.ensure_channels(3)?;
        }
        Ok(())
    }

    /// Concatenates the bundle into the fixed channel layout.
    pub fn to_channels(&self, layout: &ConditioningLayout) -> Result<FeatureImage<T>> {
        self.validate()?;
        for feat in [&self.warped_feat, &self.iter_feat].into_iter().flatten() {
            feat.ensure_channels(layout.projected_dim)?;
        }
        let (h, w) = (self.height(), self.width());
        let mut out = FeatureImage::zeros(h, w, layout.channels());
        let copy = |out: &mut FeatureImage<T>, src: &FeatureImage<T>, start: usize| {
            let c = src.channels();
            for (dst, s) in out
                .data_mut()
                .chunks_exact_mut(layout.channels())
                .zip(src.pixels())
            {
                dst[start..start + c].copy_from_slice(s);
            }
        };
        copy(&mut out, &self.ray_map, ConditioningLayout::RAY);
        if let Some(img) = &self.warped_rgb {
            copy(&mut out, img, ConditioningLayout::WARPED_RGB);
        }
        if let Some(img) = &self.warped_feat {
            copy(&mut out, img, layout.warped_feat());
        }
        if let Some(img) = &self.iter_rgb {
            copy(&mut out, img, layout.iter_rgb());
        }
        if let Some(img) = &self.iter_feat {
            copy(&mut out, img, layout.iter_feat());
        }
        let mask_on = self.mode.uses_warped_rgb();
        let mode_ch = layout.mode() + self.mode.index();
        for (i, px) in out
            .data_mut()
            .chunks_exact_mut(layout.channels())
            .enumerate()
        {
            if mask_on && self.mask.data()[i] {
                px[layout.mask()] = T::one();
            }
            px[mode_ch] = T::one();
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_round_trip() {
        for m in ConditioningMode::ALL {
            assert_eq!(m.name().parse::<ConditioningMode>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("dino".parse::<ConditioningMode>().is_err());
    }

    #[test]
    fn layout_offsets() {
        let l = ConditioningLayout::new(4);
        assert_eq!(l.warped_feat(), 9);
        assert_eq!(l.iter_rgb(), 13);
        assert_eq!(l.iter_feat(), 16);
        assert_eq!(l.mask(), 20);
        assert_eq!(l.mode(), 21);
        assert_eq!(l.channels(), 26);
    }

    #[test]
    fn presence_must_match_mode() {
        let mut b = ConditioningBundle::<f64>::ray_only(FeatureImage::zeros(2, 2, 6));
        assert!(b.validate().is_ok());
        b.mode = ConditioningMode::WarpedRgb;
        assert!(b.validate().is_err());
        b.warped_rgb = Some(FeatureImage::zeros(2, 2, 3));
        assert!(b.validate().is_ok());
        b.iter_feat = Some(FeatureImage::zeros(2, 2, 4));
        assert!(b.validate().is_err());
    }

    #[test]
    fn channels_are_placed_and_absent_slots_zero() {
        let layout = ConditioningLayout::new(2);
        let b = ConditioningBundle {
            mode: ConditioningMode::WarpedFeat,
            ray_map: FeatureImage::filled(1, 2, 6, 1.0),
            warped_rgb: Some(FeatureImage::filled(1, 2, 3, 2.0)),
            warped_feat: Some(FeatureImage::filled(1, 2, 2, 3.0)),
            iter_rgb: None,
            iter_feat: None,
            mask: RenderMask::from_fn(1, 2, |_, x| x == 1),
        };
        let c = b.to_channels(&layout).unwrap();
        assert_eq!(c.channels(), layout.channels());
        let p0 = c.pixel(0, 0);
        assert_eq!(&p0[..6], &[1.0; 6]);
        assert_eq!(&p0[6..9], &[2.0; 3]);
        assert_eq!(&p0[9..11], &[3.0; 2]);
        assert_eq!(&p0[11..16], &[0.0; 5]);
        assert_eq!(p0[layout.mask()], 0.0);
        assert_eq!(c.pixel(0, 1)[layout.mask()], 1.0);
        assert_eq!(&p0[layout.mode()..], &[0.0, 0.0, 1.0, 0.0, 0.0]);
    }
}
