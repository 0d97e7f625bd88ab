//! Procedural scenes, a ground-truth renderer and camera trajectories.

mod render;
mod spec;
mod trajectory;

pub use render::{render_scene, render_views};
pub use spec::{
    random_scene, Primitive, SceneSpec, ViewSpec, CAMERA_DISTANCE, PRIMITIVE_COUNT, PRIMITIVE_GAP,
    PRIMITIVE_SIZE,
};
pub use trajectory::{
    base_camera, make_trajectory, scene_cameras, target_orbit, TrajectoryKind, TrajectorySpec,
    FOCAL_PER_WIDTH,
};
