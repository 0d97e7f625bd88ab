use super::spec::{Primitive, SceneSpec};
use crate::diffusion::SourceView;
use crate::geometry::{Camera, FeatureImage, Mat3, Vec3};
use crate::scalar::Real;

/// Nearest positive ray parameter of `origin + t * dir` hitting `prim`.
fn intersect<T: Real>(prim: &Primitive, origin: &Vec3<T>, dir: &Vec3<T>) -> Option<T> {
    let zero = T::zero();
    match prim {
        Primitive::Sphere { center, radius, .. } => {
            let oc = *origin - Vec3::from_f64(*center);
            let a = dir.dot(dir);
            let b = T::lit(2.0) * dir.dot(&oc);
            let r = T::lit(*radius);
            let c = oc.dot(&oc) - r * r;
            let disc = b * b - T::lit(4.0) * a * c;
            if disc < zero {
                return None;
            }
            let sq = disc.sqrt();
            let two_a = T::lit(2.0) * a;
            let near = (-b - sq) / two_a;
            let far = (-b + sq) / two_a;
            if near > zero {
                Some(near)
            } else if far > zero {
                Some(far)
            } else {
                None
            }
        }
        Primitive::Box { center, size, .. } => {
            let mut t_near = T::neg_infinity();
            let mut t_far = T::infinity();
            for k in 0..3 {
                let half = T::lit(0.5 * size[k]);
                let lo = T::lit(center[k]) - half;
                let hi = T::lit(center[k]) + half;
                let (o, d) = (origin.0[k], dir.0[k]);
                if d == zero {
                    if o < lo || o > hi {
                        return None;
                    }
                    continue;
                }
                let (mut t1, mut t2) = ((lo - o) / d, (hi - o) / d);
                if t1 > t2 {
                    std::mem::swap(&mut t1, &mut t2);
                }
                t_near = t_near.max(t1);
                t_far = t_far.min(t2);
            }
            if t_near > t_far || t_far <= zero {
                None
            } else if t_near > zero {
                Some(t_near)
            } else {
                Some(t_far)
            }
        }
    }
}

/// Ray-cast render with flat albedo shading.
///
/// Depth is camera-frame z of the nearest hit, `+inf` on a miss. Rays are
/// parameterized so the ray parameter equals that depth.
pub fn render_scene<T: Real>(
    spec: &SceneSpec,
    cam: &Camera<T>,
) -> (FeatureImage<T>, FeatureImage<T>) {
    let (h, w) = (cam.height, cam.width);
    let mut rgb = FeatureImage::zeros(h, w, 3);
    let mut depth = FeatureImage::filled(h, w, 1, T::infinity());
    let origin = cam.center();
    let rt: Mat3<T> = cam.rotation.transpose();
    let background = spec.background.map(T::lit);
    for row in 0..h {
        for col in 0..w {
            let (u, v) = cam.pixel_center(row, col);
            let dir = rt.mul_vec(&cam.pixel_ray_camera(u, v));
            let mut best: Option<(T, &Primitive)> = None;
            for prim in &spec.primitives {
                if let Some(t) = intersect(prim, &origin, &dir) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, prim));
                    }
                }
            }
            let px = rgb.pixel_mut(row, col);
            match best {
                Some((t, prim)) => {
                    px.copy_from_slice(&prim.albedo().map(T::lit));
                    depth.set(row, col, 0, t);
                }
                None => px.copy_from_slice(&background),
            }
        }
    }
    (rgb, depth)
}

/// Renders every camera into a posed RGB-D view.
pub fn render_views<T: Real>(spec: &SceneSpec, cams: &[Camera<T>]) -> Vec<SourceView<T>> {
    cams.iter()
        .map(|cam| {
            let (rgb, depth) = render_scene(spec, cam);
            SourceView {
                rgb,
                depth,
                camera: cam.clone(),
            }
        })
        .collect()
}
