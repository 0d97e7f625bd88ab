use crate::error::Result;
use crate::geometry::{FeatureImage, RenderMask};
use crate::scalar::Real;

/// `mask ⊙ warped + (1 - mask) ⊙ iterative`, as a per-pixel select.
pub fn fuse_features<T: Real>(
    warped: &FeatureImage<T>,
    iterative: &FeatureImage<T>,
    mask: &RenderMask,
) -> Result<FeatureImage<T>> {
    warped.ensure_shape(iterative)?;
    mask.ensure_matches(warped)?;
    let mut out = iterative.clone();
    let c = warped.channels();
    for (i, (dst, src)) in out
        .data_mut()
        .chunks_exact_mut(c)
        .zip(warped.pixels())
        .enumerate()
    {
        if mask.data()[i] {
            dst.copy_from_slice(src);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (FeatureImage<f64>, FeatureImage<f64>) {
        (
            FeatureImage::from_fn(4, 5, 3, |y, x, c| (y * 5 + x + c) as f64),
            FeatureImage::from_fn(4, 5, 3, |y, x, c| -((y + x * c) as f64) - 0.5),
        )
    }

    #[test]
    fn full_and_empty_masks() {
        let (w, it) = pair();
        assert_eq!(
            fuse_features(&w, &it, &RenderMask::new(4, 5, true)).unwrap(),
            w
        );
        assert_eq!(
            fuse_features(&w, &it, &RenderMask::new(4, 5, false)).unwrap(),
            it
        );
    }

    #[test]
    fn checkerboard_selects_per_pixel() {
        let (w, it) = pair();
        let mask = RenderMask::from_fn(4, 5, |y, x| (y + x) % 2 == 0);
        let out = fuse_features(&w, &it, &mask).unwrap();
        for y in 0..4 {
            for x in 0..5 {
                let src = if mask.get(y, x) { &w } else { &it };
                assert_eq!(out.pixel(y, x), src.pixel(y, x));
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (w, _) = pair();
        let other = FeatureImage::zeros(4, 5, 2);
        assert!(fuse_features(&w, &other, &RenderMask::new(4, 5, true)).is_err());
        assert!(fuse_features(&w, &w, &RenderMask::new(5, 4, true)).is_err());
    }
}
