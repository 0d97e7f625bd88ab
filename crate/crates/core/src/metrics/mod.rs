//! Evaluation metrics: sharpness and drift, pose errors, PSNR / SSIM.

mod fidelity;
mod pose;
mod quality;

pub use fidelity::{psnr, ssim, PSNR_CAP_DB, SSIM_SIGMA, SSIM_WINDOW};
pub use pose::{
    align_poses, pose_errors, rotation_error, translation_error, PoseSequence, ROTATION_TOLERANCE,
};
pub use quality::{
    drift_from_qualities, drift_slices, frame_quality, quality_drift, video_quality, VideoFrames,
};
