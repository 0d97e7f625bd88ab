use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::spec::SceneSpec;
use crate::error::{Error, Result};
use crate::geometry::{Camera, Mat3, Vec3};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrajectoryKind {
    /// Rotate about the camera's vertical axis through the point `radius`
    /// ahead of the base camera, by `span_deg` in total.
    Orbit { radius: f64, span_deg: f64 },
    /// Move `distance` along the viewing axis.
    DollyForward { distance: f64 },
    /// Move `span` along the camera's right axis.
    Lateral { span: f64 },
}

impl TrajectoryKind {
    /// Parses `orbit`, `dolly-forward` or `lateral` with an extent value
    /// (`radius` is only used by orbits).
    pub fn parse(kind: &str, extent: f64, radius: f64) -> Result<Self> {
        match kind {
            "orbit" => Ok(TrajectoryKind::Orbit {
                radius,
                span_deg: extent,
            }),
            "dolly-forward" => Ok(TrajectoryKind::DollyForward { distance: extent }),
            "lateral" => Ok(TrajectoryKind::Lateral { span: extent }),
            other => Err(Error::InvalidArgument(format!(
                "unknown trajectory kind '{other}' (expected orbit, dolly-forward or lateral)"
            ))),
        }
    }
}

impl FromStr for TrajectoryKind {
    type Err = Error;

    /// `orbit:<radius>:<span_deg>`, `dolly-forward:<distance>`, `lateral:<span>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("trajectory '{s}' is missing a value"))
                })?
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad number in trajectory '{s}'")))
        };
        match parts[0] {
            "orbit" => TrajectoryKind::parse("orbit", num(2)?, num(1)?),
            kind => TrajectoryKind::parse(kind, num(1)?, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    #[serde(flatten)]
    pub kind: TrajectoryKind,
    pub frame_count: usize,
}

/// Cameras along the trajectory; frame 0 is `base` exactly.
pub fn make_trajectory<T: Real>(spec: &TrajectorySpec, base: &Camera<T>) -> Result<Vec<Camera<T>>> {
    if spec.frame_count < 2 {
        return Err(Error::InvalidArgument(
            "a trajectory needs at least two frames".into(),
        ));
    }
    base.validate()?;
    let last = (spec.frame_count - 1) as f64;
    let mut cams = Vec::with_capacity(spec.frame_count);
    cams.push(base.clone());
    for j in 1..spec.frame_count {
        let s = j as f64 / last;
        let cam = match spec.kind {
            TrajectoryKind::Orbit { radius, span_deg } => {
                let rt = base.rotation.transpose();
                let forward = rt.mul_vec(&Vec3::new(T::zero(), T::zero(), T::one()));
                let axis = rt.mul_vec(&Vec3::new(T::zero(), T::one(), T::zero()));
                let pivot = base.center() + forward.scale(T::lit(radius));
                let q = Mat3::from_axis_angle(&axis, T::lit((span_deg * s).to_radians()));
                let qt = q.transpose();
                Camera {
                    rotation: base.rotation.matmul(&qt),
                    translation: base.translation
                        + base.rotation.mul_vec(&(pivot - qt.mul_vec(&pivot))),
                    ..base.clone()
                }
            }
            TrajectoryKind::DollyForward { distance } => Camera {
                translation: base.translation
                    - Vec3::new(T::zero(), T::zero(), T::lit(distance * s)),
                ..base.clone()
            },
            TrajectoryKind::Lateral { span } => Camera {
                translation: base.translation - Vec3::new(T::lit(span * s), T::zero(), T::zero()),
                ..base.clone()
            },
        };
        cam.validate()?;
        cams.push(cam);
    }
    Ok(cams)
}

/// Focal length as a multiple of image width used for scene cameras.
pub const FOCAL_PER_WIDTH: f64 = 1.0;

/// The scene's base camera: looks at the origin from its `view` placement.
pub fn base_camera<T: Real>(spec: &SceneSpec, width: usize, height: usize) -> Camera<T> {
    let (az, el) = (
        spec.view.azimuth_deg.to_radians(),
        spec.view.elevation_deg.to_radians(),
    );
    let d = spec.view.distance;
    let eye = Vec3::from_f64([
        d * el.cos() * az.sin(),
        d * el.sin(),
        -d * el.cos() * az.cos(),
    ]);
    Camera::centered(T::lit(FOCAL_PER_WIDTH * width as f64), width, height).looking_at(
        eye,
        Vec3::zeros(),
        Vec3::new(T::zero(), T::one(), T::zero()),
    )
}

/// Orbit about the point the base camera looks at.
pub fn target_orbit(spec: &SceneSpec, span_deg: f64, frame_count: usize) -> TrajectorySpec {
    TrajectorySpec {
        kind: TrajectoryKind::Orbit {
            radius: spec.view.distance,
            span_deg,
        },
        frame_count,
    }
}

/// Base camera followed along `traj`.
pub fn scene_cameras<T: Real>(
    spec: &SceneSpec,
    traj: &TrajectorySpec,
    width: usize,
    height: usize,
) -> Result<Vec<Camera<T>>> {
    make_trajectory(traj, &base_camera(spec, width, height))
}
