//! Projection of feature clouds into cameras and the inverse lift.

use super::camera::Camera;
use super::cloud::FeaturePointCloud;
use super::image::{FeatureImage, RenderMask};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection<T> {
    pub u: T,
    pub v: T,
    pub depth: T,
    pub point_index: usize,
}

impl<T: Real> Projection<T> {
    /// Pixel whose center is nearest to `(u, v)` (centers sit at `+0.5`).
    pub fn pixel(&self) -> (usize, usize) {
        (
            self.v.floor().to_usize().unwrap_or(0),
            self.u.floor().to_usize().unwrap_or(0),
        )
    }
}

/// Points in front of the camera that land inside the image, in cloud order.
pub fn project_points<T: Real>(
    cloud: &FeaturePointCloud<T>,
    cam: &Camera<T>,
) -> Vec<Projection<T>> {
    let (w, h) = (T::lit(cam.width as f64), T::lit(cam.height as f64));
    cloud
        .positions()
        .iter()
        .enumerate()
        .filter_map(|(point_index, p)| {
            let pc = cam.world_to_camera(p);
            let (u, v) = cam.project_camera_point(&pc)?;
            let inside = u >= T::zero() && u < w && v >= T::zero() && v < h;
            inside.then_some(Projection {
                u,
                v,
                depth: pc.z(),
                point_index,
            })
        })
        .collect()
}

/// Output of [`splat_features`].
#[derive(Clone, Debug, PartialEq)]
pub struct Splat<T> {
    pub features: FeatureImage<T>,
    pub mask: RenderMask,
    /// One channel; `+inf` where nothing landed.
    pub depth: FeatureImage<T>,
}

/// Nearest-pixel point splatting with a hard z-buffer.
///
/// Smallest depth wins; equal depths keep the lowest point index.
pub fn splat_features<T: Real>(cloud: &FeaturePointCloud<T>, cam: &Camera<T>) -> Splat<T> {
    let (h, w, c) = (cam.height, cam.width, cloud.channels());
    let mut winner: Vec<Option<(T, usize)>> = vec![None; h * w];
    for p in project_points(cloud, cam) {
        let (row, col) = p.pixel();
        let slot = &mut winner[row * w + col];
        // projections arrive in increasing point order, so strict `<` keeps the lowest index on ties
        match slot {
            Some((d, _)) if !(p.depth < *d) => {}
            _ => *slot = Some((p.depth, p.point_index)),
        }
    }

    let mut features = FeatureImage::zeros(h, w, c);
    let mut depth = FeatureImage::filled(h, w, 1, T::infinity());
    let mut mask = RenderMask::new(h, w, false);
    for (i, slot) in winner.iter().enumerate() {
        if let Some((d, idx)) = slot {
            let (row, col) = (i / w, i % w);
            features
                .pixel_mut(row, col)
                .copy_from_slice(cloud.feature(*idx));
            depth.set(row, col, 0, *d);
            mask.set(row, col, true);
        }
    }
    Splat {
        features,
        mask,
        depth,
    }
}

/// Unprojects every finite, positive-depth pixel into a world-space point
/// carrying that pixel's feature vector.
pub fn lift_view<T: Real>(
    image: &FeatureImage<T>,
    depth: &FeatureImage<T>,
    cam: &Camera<T>,
) -> Result<FeaturePointCloud<T>> {
    if !image.same_spatial(cam.height, cam.width) || !depth.same_spatial(cam.height, cam.width) {
        return Err(Error::shape(
            format!("{}x{} (camera)", cam.height, cam.width),
            format!(
                "image {}x{}, depth {}x{}",
                image.height(),
                image.width(),
                depth.height(),
                depth.width()
            ),
        ));
    }
    depth.ensure_channels(1)?;
    let mut cloud = FeaturePointCloud::empty(image.channels());
    for row in 0..cam.height {
        for col in 0..cam.width {
            let z = depth.get(row, col, 0);
            if z.is_finite() && z > T::zero() {
                cloud.push(cam.unproject_pixel(row, col, z), image.pixel(row, col));
            }
        }
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::linalg::Vec3;

    fn cam() -> Camera<f64> {
        Camera {
            cx: 32.0,
            cy: 32.0,
            ..Camera::centered(100.0, 64, 64)
        }
    }

    fn cloud(points: &[[f64; 3]], feats: &[f64]) -> FeaturePointCloud<f64> {
        FeaturePointCloud::new(points.iter().map(|p| Vec3(*p)).collect(), 1, feats.to_vec())
            .unwrap()
    }

    #[test]
    fn on_axis_point_hits_principal_point() {
        let p = project_points(&cloud(&[[0.0, 0.0, 5.0]], &[1.0]), &cam());
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].u, p[0].v, p[0].depth), (32.0, 32.0, 5.0));
    }

    #[test]
    fn behind_camera_is_dropped() {
        assert!(project_points(&cloud(&[[0.0, 0.0, -1.0]], &[1.0]), &cam()).is_empty());
    }

    #[test]
    fn off_axis_pinhole() {
        let p = project_points(&cloud(&[[1.0, 0.0, 5.0]], &[1.0]), &cam());
        assert_eq!(p[0].u, 52.0);
    }

    #[test]
    fn outside_frame_is_dropped() {
        // u = 100 * 2 / 5 + 32 = 72 > 64
        assert!(project_points(&cloud(&[[2.0, 0.0, 5.0]], &[1.0]), &cam()).is_empty());
    }

    #[test]
    fn nearest_depth_wins() {
        let c = cloud(&[[0.0, 0.0, 5.0], [0.0, 0.0, 2.0]], &[7.0, 3.0]);
        let s = splat_features(&c, &cam());
        assert_eq!(s.features.get(32, 32, 0), 3.0);
        assert_eq!(s.depth.get(32, 32, 0), 2.0);
        assert_eq!(s.mask.covered(), 1);
    }

    #[test]
    fn equal_depth_keeps_lowest_index() {
        let c = cloud(&[[0.0, 0.0, 5.0], [0.001, 0.0, 5.0]], &[1.0, 2.0]);
        let s = splat_features(&c, &cam());
        assert_eq!(s.features.get(32, 32, 0), 1.0);
    }

    #[test]
    fn empty_cloud_gives_empty_splat() {
        let s = splat_features(&FeaturePointCloud::empty(4), &cam());
        assert_eq!(s.mask.covered(), 0);
        assert!(s.features.data().iter().all(|&v| v == 0.0));
        assert!(s.depth.data().iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn single_pixel_lift() {
        let cam = Camera::<f64>::centered(10.0, 1, 1);
        let img = FeatureImage::filled(1, 1, 2, 0.25);
        let depth = FeatureImage::filled(1, 1, 1, 5.0);
        let c = lift_view(&img, &depth, &cam).unwrap();
        assert_eq!(c.positions(), &[Vec3::new(0.0, 0.0, 5.0)]);
        assert_eq!(c.feature(0), &[0.25, 0.25]);
    }

    #[test]
    fn infinite_depth_lifts_nothing() {
        let cam = Camera::<f64>::centered(10.0, 4, 3);
        let img = FeatureImage::filled(3, 4, 3, 0.5);
        let depth = FeatureImage::filled(3, 4, 1, f64::INFINITY);
        assert!(lift_view(&img, &depth, &cam).unwrap().is_empty());
    }

    #[test]
    fn lift_rejects_mismatched_sizes() {
        let cam = Camera::<f64>::centered(10.0, 4, 3);
        let img = FeatureImage::filled(4, 4, 3, 0.5);
        let depth = FeatureImage::filled(3, 4, 1, 1.0);
        assert!(matches!(
            lift_view(&img, &depth, &cam),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
