//! Camera-pose alignment and rotation / translation errors.

use crate::error::{Error, Result};
use crate::geometry::{Camera, Mat3, Vec3};
use crate::scalar::Real;

pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// World-to-camera poses of a sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseSequence<T> {
    pub rotations: Vec<Mat3<T>>,
    pub translations: Vec<Vec3<T>>,
}

fn check_rotation<T: Real>(r: &Mat3<T>) -> Result<()> {
    let tol = T::lit(ROTATION_TOLERANCE);
    if r.orthonormality_error() > tol || (r.det() - T::one()).abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "matrix is not a rotation within {ROTATION_TOLERANCE}: {r:?}"
        )));
    }
    Ok(())
}

impl<T: Real> PoseSequence<T> {
    pub fn new(rotations: Vec<Mat3<T>>, translations: Vec<Vec3<T>>) -> Result<Self> {
        if rotations.len() != translations.len() {
            return Err(Error::shape(
                format!("{} translations", rotations.len()),
                translations.len().to_string(),
            ));
        }
        rotations.iter().try_for_each(check_rotation)?;
        Ok(PoseSequence {
            rotations,
            translations,
        })
    }

    pub fn from_cameras(cams: &[Camera<T>]) -> Result<Self> {
        Self::new(
            cams.iter().map(|c| c.rotation).collect(),
            cams.iter().map(|c| c.translation).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }
}

/// Re-expresses every pose relative to frame 0 and scales translations so
/// the furthest frame sits at unit distance.
pub fn align_poses<T: Real>(seq: &PoseSequence<T>) -> Result<PoseSequence<T>> {
    if seq.len() < 2 {
        return Err(Error::InvalidArgument(
            "alignment needs at least two poses".into(),
        ));
    }
    let r0t = seq.rotations[0].transpose();
    let t0 = seq.translations[0];
    let mut rotations = Vec::with_capacity(seq.len());
    let mut translations = Vec::with_capacity(seq.len());
    rotations.push(Mat3::identity());
    translations.push(Vec3::zeros());
    for (r, t) in seq.rotations.iter().zip(&seq.translations).skip(1) {
        let rel = r.matmul(&r0t);
        rotations.push(rel);
        translations.push(*t - rel.mul_vec(&t0));
    }
    let furthest = translations.iter().map(Vec3::norm).fold(T::zero(), T::max);
    if furthest >= T::lit(1e-12) {
        let inv = T::one() / furthest;
        translations.iter_mut().for_each(|t| *t = t.scale(inv));
    } else {
        translations.iter_mut().for_each(|t| *t = Vec3::zeros());
    }
    Ok(PoseSequence {
        rotations,
        translations,
    })
}

/// Geodesic angle between two rotations in degrees.
///
/// Equals `arccos((tr(R_gen R_gtᵀ) - 1) / 2)`; evaluated as `atan2(sin, cos)`
/// from the skew part so that small angles keep full precision.
pub fn rotation_error<T: Real>(r_gen: &Mat3<T>, r_gt: &Mat3<T>) -> Result<T> {
    check_rotation(r_gen)?;
    check_rotation(r_gt)?;
    let d = r_gen.matmul(&r_gt.transpose()).0;
    let two = T::lit(2.0);
    let cos = (d[0][0] + d[1][1] + d[2][2] - T::one()) / two;
    let sin = Vec3::new(d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]).norm() / two;
    Ok(sin.atan2(cos.max(-T::one()).min(T::one())).to_degrees())
}

pub fn translation_error<T: Real>(t_gen: &Vec3<T>, t_gt: &Vec3<T>) -> T {
    (*t_gt - *t_gen).norm()
}

/// Per-frame `(RE degrees, TE)` after aligning both sequences.
pub fn pose_errors<T: Real>(gen: &PoseSequence<T>, gt: &PoseSequence<T>) -> Result<Vec<(T, T)>> {
    if gen.len() != gt.len() {
        return Err(Error::shape(
            format!("{} poses", gt.len()),
            gen.len().to_string(),
        ));
    }
    let (a, b) = (align_poses(gen)?, align_poses(gt)?);
    (0..a.len())
        .map(|i| {
            Ok((
                rotation_error(&a.rotations[i], &b.rotations[i])?,
                translation_error(&a.translations[i], &b.translations[i]),
            ))
        })
        .collect()
}
