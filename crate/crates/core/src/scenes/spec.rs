use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Randomization ranges for [`random_scene`].
pub const PRIMITIVE_COUNT: (usize, usize) = (3, 8);
pub const PRIMITIVE_SIZE: (f64, f64) = (0.2, 1.5);
pub const CAMERA_DISTANCE: (f64, f64) = (3.0, 8.0);
/// Minimum clearance between the bounding spheres of any two primitives.
pub const PRIMITIVE_GAP: f64 = 0.3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Primitive {
    Sphere {
        center: [f64; 3],
        radius: f64,
        albedo: [f64; 3],
    },
    /// Axis-aligned box; `size` holds full edge lengths.
    Box {
        center: [f64; 3],
        size: [f64; 3],
        albedo: [f64; 3],
    },
}

impl Primitive {
    pub fn center(&self) -> [f64; 3] {
        match self {
            Primitive::Sphere { center, .. } | Primitive::Box { center, .. } => *center,
        }
    }

    pub fn albedo(&self) -> [f64; 3] {
        match self {
            Primitive::Sphere { albedo, .. } | Primitive::Box { albedo, .. } => *albedo,
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        match self {
            Primitive::Sphere { radius, .. } => *radius,
            Primitive::Box { size, .. } => 0.5 * size.iter().map(|s| s * s).sum::<f64>().sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let unit = |v: &[f64]| v.iter().all(|x| (0.0..=1.0).contains(x));
        let ok = match self {
            Primitive::Sphere {
                center,
                radius,
                albedo,
            } => finite(center) && radius.is_finite() && *radius > 0.0 && unit(albedo),
            Primitive::Box {
                center,
                size,
                albedo,
            } => finite(center) && finite(size) && size.iter().all(|s| *s > 0.0) && unit(albedo),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid primitive {self:?}"
            )))
        }
    }
}

/// Where the base camera of a scene sits, looking at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub primitives: Vec<Primitive>,
    pub background: [f64; 3],
    pub view: ViewSpec,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() {
            return Err(Error::InvalidArgument(
                "scene needs at least one primitive".into(),
            ));
        }
        for p in &self.primitives {
            p.validate()?;
        }
        if !self.background.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "background must lie in [0, 1]".into(),
            ));
        }
        if !(self.view.distance > 0.0 && self.view.distance.is_finite()) {
            return Err(Error::InvalidArgument(
                "camera distance must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Radius of a sphere about the origin enclosing every primitive.
    pub fn extent(&self) -> f64 {
        self.primitives
            .iter()
            .map(|p| {
                let c = p.center();
                (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() + p.bounding_radius()
            })
            .fold(0.0, f64::max)
    }
}

fn random_color(rng: &mut impl Rng, lo: f64, hi: f64) -> [f64; 3] {
    [0, 1, 2].map(|_| rng.random_range(lo..hi))
}

/// Procedural scene of 3-8 boxes and spheres whose bounding spheres keep
/// [`PRIMITIVE_GAP`] clearance. Same seed, same scene.
pub fn random_scene(seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5CE7_E5EE_D000_0001);
    let count = rng.random_range(PRIMITIVE_COUNT.0..=PRIMITIVE_COUNT.1);
    let (lo, hi) = PRIMITIVE_SIZE;
    let mut primitives: Vec<Primitive> = Vec::with_capacity(count);
    let mut region = 1.5;
    let mut failures = 0;
    while primitives.len() < count {
        let albedo = random_color(&mut rng, 0.05, 1.0);
        let candidate = if rng.random_bool(0.5) {
            Primitive::Sphere {
                center: [0.0; 3],
                radius: 0.5 * rng.random_range(lo..hi),
                albedo,
            }
        } else {
            Primitive::Box {
                center: [0.0; 3],
                size: [0, 1, 2].map(|_| rng.random_range(lo..hi)),
                albedo,
            }
        };
        let center = [0, 1, 2].map(|_| rng.random_range(-region..region));
        let r = candidate.bounding_radius();
        let clear = primitives.iter().all(|p| {
            let c = p.center();
            let d = ((c[0] - center[0]).powi(2)
                + (c[1] - center[1]).powi(2)
                + (c[2] - center[2]).powi(2))
            .sqrt();
            d >= r + p.bounding_radius() + PRIMITIVE_GAP
        });
        if clear {
            primitives.push(match candidate {
                Primitive::Sphere { radius, albedo, .. } => Primitive::Sphere {
                    center,
                    radius,
                    albedo,
                },
                Primitive::Box { size, albedo, .. } => Primitive::Box {
                    center,
                    size,
                    albedo,
                },
            });
        } else {
            failures += 1;
            if failures % 64 == 0 {
                region *= 1.1;
            }
        }
    }
    let background = random_color(&mut rng, 0.0, 0.35);
    let mut spec = SceneSpec {
        seed,
        primitives,
        background,
        view: ViewSpec {
            azimuth_deg: rng.random_range(-180.0..180.0),
            elevation_deg: rng.random_range(-20.0..20.0),
            distance: rng.random_range(CAMERA_DISTANCE.0..CAMERA_DISTANCE.1),
        },
    };
    spec.view.distance = spec.view.distance.max(spec.extent() + 0.5);
    spec
}
