//! Cameras, point clouds, feature splatting and ray maps.

mod camera;
mod cloud;
mod image;
pub mod linalg;
mod rays;
mod splat;

pub use camera::{cameras_from_json, cameras_to_json, Camera, CameraRecord};
pub use cloud::FeaturePointCloud;
pub use image::{FeatureImage, RenderMask};
pub use linalg::{Mat3, Vec3};
pub use rays::plucker_ray_map;
pub use splat::{lift_view, project_points, splat_features, Projection, Splat};
