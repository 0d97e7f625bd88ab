use super::camera::Camera;
use super::image::FeatureImage;
use crate::scalar::Real;

/// Per-pixel Plücker coordinates of the world-space ray through each pixel
/// center: channels `(d, o x d)` with `d` unit length and `o` the camera center.
pub fn plucker_ray_map<T: Real>(cam: &Camera<T>) -> FeatureImage<T> {
    let origin = cam.center();
    let rt = cam.rotation.transpose();
    let mut out = FeatureImage::zeros(cam.height, cam.width, 6);
    for row in 0..cam.height {
        for col in 0..cam.width {
            let (u, v) = cam.pixel_center(row, col);
            let d = rt.mul_vec(&cam.pixel_ray_camera(u, v)).normalized();
            let m = origin.cross(&d);
            let px = out.pixel_mut(row, col);
            px[..3].copy_from_slice(&d.0);
            px[3..].copy_from_slice(&m.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::linalg::{Mat3, Vec3};

    // principal point at the center of pixel (2, 2)
    fn cam() -> Camera<f64> {
        Camera {
            cx: 2.5,
            cy: 2.5,
            ..Camera::centered(4.0, 5, 5)
        }
    }

    #[test]
    fn optical_axis_through_origin() {
        let map = plucker_ray_map(&cam());
        assert_eq!(map.pixel(2, 2), &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn translated_camera_moment() {
        let mut c = cam();
        c.translation = Vec3::new(-1.0, 0.0, 0.0); // center o = (1, 0, 0)
        let map = plucker_ray_map(&c);
        let px = map.pixel(2, 2);
        assert_eq!(&px[..3], &[0.0, 0.0, 1.0]);
        assert_eq!(&px[3..], &[0.0, -1.0, 0.0]);
    }

    #[test]
    fn plucker_constraints_hold_for_rotated_camera() {
        let mut c = cam();
        c.rotation = Mat3::from_axis_angle(&Vec3::new(0.2, 1.0, -0.4), 0.7);
        c.translation = Vec3::new(0.3, -2.0, 4.0);
        let map = plucker_ray_map(&c);
        for px in map.pixels() {
            let d = Vec3([px[0], px[1], px[2]]);
            let m = Vec3([px[3], px[4], px[5]]);
            assert!((d.norm() - 1.0).abs() < 1e-9);
            assert!(d.dot(&m).abs() < 1e-9);
        }
    }
}
