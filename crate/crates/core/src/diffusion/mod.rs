//! Noise schedules, the Euler sampler and conditioning assembly.

mod conditioning;
mod denoiser;
mod sampler;
mod schedule;
mod warp;

pub use conditioning::{ConditioningBundle, ConditioningLayout, ConditioningMode};
pub use denoiser::{Denoiser, GaussianOracleDenoiser, ZeroDenoiser};
pub use sampler::{
    denoised_estimate, estimate_from_noise, euler_step, euler_update, euler_update_via_estimate,
    forward_noise, gaussian_image, sample_trajectory, DiffusionState, FrameSample,
    TrajectorySampler,
};
pub use schedule::{
    NoiseSchedule, ScheduleConfig, DEFAULT_RHO, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN, DEFAULT_STEPS,
};
pub use warp::{LiftedSource, SourceView, WarpedTarget};
