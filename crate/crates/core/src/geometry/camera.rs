use serde::{Deserialize, Serialize};

use super::linalg::{Mat3, Vec3};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pinhole camera with a rigid world-to-camera pose: `x_cam = R * x_world + t`.
///
/// Pixel `(row, col)` covers `[col, col + 1) x [row, row + 1)` in image
/// coordinates, so its center sits at `(col + 0.5, row + 0.5)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

/// Orthonormality tolerance for `f64`; coarser scalars get `256 * epsilon`.
const ORTHO_TOL: f64 = 1e-9;

impl<T: Real> Camera<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: T,
        fy: T,
        cx: T,
        cy: T,
        width: usize,
        height: usize,
        rotation: Mat3<T>,
        translation: Vec3<T>,
    ) -> Result<Self> {
        let cam = Camera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Identity pose camera with the principal point at the image center.
    pub fn centered(focal: T, width: usize, height: usize) -> Self {
        Camera {
            fx: focal,
            fy: focal,
            cx: T::lit(width as f64 / 2.0),
            cy: T::lit(height as f64 / 2.0),
            width,
            height,
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Replaces the pose with one placing the camera center at `eye` looking at `target`.
    pub fn looking_at(mut self, eye: Vec3<T>, target: Vec3<T>, up: Vec3<T>) -> Self {
        self.rotation = Mat3::look_at(&eye, &target, &up);
        self.translation = -self.rotation.mul_vec(&eye);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera(
                "image size must be at least 1x1".into(),
            ));
        }
        if !(self.cx.is_finite() && self.cy.is_finite() && self.translation.is_finite()) {
            return Err(Error::InvalidCamera(
                "non-finite intrinsics or translation".into(),
            ));
        }
        let tol = T::lit(ORTHO_TOL).max(T::epsilon() * T::lit(256.0));
        let ortho = self.rotation.orthonormality_error();
        if !(ortho <= tol) {
            return Err(Error::InvalidCamera(format!(
                "rotation is not orthonormal (max |RᵀR - I| = {ortho})"
            )));
        }
        let det = self.rotation.det();
        if !((det - T::one()).abs() <= tol) {
            return Err(Error::InvalidCamera(format!(
                "rotation determinant {det} != 1"
            )));
        }
        Ok(())
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vec3<T> {
        -self.rotation.transpose().mul_vec(&self.translation)
    }

    pub fn world_to_camera(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    pub fn camera_to_world(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rotation.transpose().mul_vec(&(*p - self.translation))
    }

    /// Pinhole projection of a camera-frame point; `None` when `z <= 0`.
    pub fn project_camera_point(&self, p: &Vec3<T>) -> Option<(T, T)> {
        let z = p.z();
        if !(z > T::zero()) {
            return None;
        }
        Some((self.fx * p.x() / z + self.cx, self.fy * p.y() / z + self.cy))
    }

    /// Camera-frame direction through image point `(u, v)` with unit z component.
    pub fn pixel_ray_camera(&self, u: T, v: T) -> Vec3<T> {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, T::one())
    }

    /// Image coordinates of the center of pixel `(row, col)`.
    pub fn pixel_center(&self, row: usize, col: usize) -> (T, T) {
        let half = T::lit(0.5);
        (T::lit(col as f64) + half, T::lit(row as f64) + half)
    }

    /// Inverse pinhole model: pixel `(row, col)` at planar depth `z` to world.
    pub fn unproject_pixel(&self, row: usize, col: usize, z: T) -> Vec3<T> {
        let (u, v) = self.pixel_center(row, col);
        self.camera_to_world(&self.pixel_ray_camera(u, v).scale(z))
    }

    /// Applies a world-space rigid change `x_old = A x_new + b`, keeping what
    /// the camera sees unchanged.
    pub fn reexpress(&self, a: &Mat3<T>, b: &Vec3<T>) -> Self {
        Camera {
            rotation: self.rotation.matmul(a),
            translation: self.rotation.mul_vec(b) + self.translation,
            ..self.clone()
        }
    }

    pub fn cast<U: Real>(&self) -> Camera<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        Camera {
            fx: c(self.fx),
            fy: c(self.fy),
            cx: c(self.cx),
            cy: c(self.cy),
            width: self.width,
            height: self.height,
            rotation: Mat3(self.rotation.0.map(|r| r.map(c))),
            translation: Vec3(self.translation.0.map(c)),
        }
    }

    pub fn to_record(&self) -> CameraRecord {
        let f = |v: T| v.to_f64_lossy();
        CameraRecord {
            fx: f(self.fx),
            fy: f(self.fy),
            cx: f(self.cx),
            cy: f(self.cy),
            width: self.width,
            height: self.height,
            rotation: self.rotation.to_row_major().map(f),
            translation: self.translation.0.map(f),
        }
    }

    pub fn from_record(r: &CameraRecord) -> Result<Self> {
        Camera::new(
            T::lit(r.fx),
            T::lit(r.fy),
            T::lit(r.cx),
            T::lit(r.cy),
            r.width,
            r.height,
            Mat3::from_row_major(r.rotation.map(T::lit)),
            Vec3::from_f64(r.translation),
        )
    }
}

/// JSON representation of a camera; trajectories are JSON arrays of these.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

pub fn cameras_to_json<T: Real>(cams: &[Camera<T>]) -> Result<String> {
    let records: Vec<_> = cams.iter().map(Camera::to_record).collect();
    Ok(serde_json::to_string_pretty(&records)?)
}

pub fn cameras_from_json<T: Real>(json: &str) -> Result<Vec<Camera<T>>> {
    let records: Vec<CameraRecord> = serde_json::from_str(json)?;
    records.iter().map(Camera::from_record).collect()
}
