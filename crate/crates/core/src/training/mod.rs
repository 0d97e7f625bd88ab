//! Trainable toy denoiser, its optimizer loop, and the blur surrogate.

mod ablation;
mod blur;
mod network;
mod tiny;
mod trainer;

pub use ablation::{
    evaluate_heldout, run_ablation, run_ablation_on, AblationConfig, AblationRow,
    HELDOUT_SCENE_BASE,
};
pub use blur::{
    blur_at, blur_kernel_size, blur_sigma, gaussian_blur, gaussian_kernel, BlurSchedule,
    DEFAULT_TAU_MAX, DEFAULT_TAU_MIN,
};
pub use network::{grad_slices, ConvLayer, ConvNet, ForwardTrace, LayerGrad};
pub use tiny::{
    combine, network_input, noise_prediction_loss, Architecture, LossEval, Preconditioning,
    TinyDenoiser, CHECKPOINT_MAGIC, MAX_HIDDEN_CHANNELS, MAX_PARAMETERS, SIGMA_DATA,
};
pub use trainer::{
    build_sample, sample_gradients, scene_set, train_denoiser, train_on_scenes, validation_loss,
    LossWeighting, OptimizerConfig, TrainConfig, TrainReport, TrainingSample, ViewSampling,
    DEFAULT_ENABLE_ITER_AFTER, DEFAULT_EXTRACTOR_SEED, DEFAULT_LEARNING_RATE,
};
