//! Resolved command lines, stored as `run_config.json` and replayable.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};
use warpdiff::diffusion::{
    ConditioningMode, ScheduleConfig, DEFAULT_RHO, DEFAULT_SIGMA_MAX, DEFAULT_SIGMA_MIN,
    DEFAULT_STEPS,
};
use warpdiff::scenes::TrajectoryKind;
use warpdiff::training::{
    Architecture, LossWeighting, OptimizerConfig, DEFAULT_ENABLE_ITER_AFTER, DEFAULT_EXTRACTOR_SEED,
};

pub const RUN_CONFIG: &str = "run_config.json";

#[derive(Clone, Debug, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    /// Generate random scenes and render their camera trajectories.
    MakeScenes(MakeScenesArgs),
    /// Train a denoiser on a scene directory.
    Train(TrainArgs),
    /// Generate novel views of one scene.
    Sample(SampleArgs),
    /// Score generated frames and poses against ground truth.
    Evaluate(EvaluateArgs),
    /// Train and score one denoiser per conditioning mode.
    Ablate(AblateArgs),
    /// Re-run a command from its run_config.json.
    Replay(ReplayArgs),
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryArgs {
    /// orbit, dolly-forward or lateral.
    #[arg(long, default_value = "orbit")]
    pub trajectory: String,
    /// Orbit span in degrees, dolly distance or lateral span.
    #[arg(long, default_value_t = 40.0)]
    pub extent: f64,
    #[arg(long, default_value_t = 8)]
    pub frames: usize,
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
}

impl TrajectoryArgs {
    /// Orbits pivot about the scene's look-at point at `distance`.
    pub fn kind(&self, distance: f64) -> warpdiff::Result<TrajectoryKind> {
        TrajectoryKind::parse(&self.trajectory, self.extent, distance)
    }
}

/// Karras noise ladder without the step count, which each command names itself.
#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = DEFAULT_SIGMA_MIN)]
    pub sigma_min: f64,
    #[arg(long, default_value_t = DEFAULT_SIGMA_MAX)]
    pub sigma_max: f64,
    #[arg(long, default_value_t = DEFAULT_RHO)]
    pub rho: f64,
}

impl ScheduleArgs {
    pub fn config(&self, steps: usize) -> ScheduleConfig {
        ScheduleConfig {
            sigma_min: self.sigma_min,
            sigma_max: self.sigma_max,
            steps,
            rho: self.rho,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MakeScenesArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub trajectory: TrajectoryArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingKind {
    Epsilon,
    Edm,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden_channels: usize,
    /// Channels produced by the toy feature extractor.
    #[arg(long, default_value_t = 64)]
    pub feature_channels: usize,
    #[arg(long, default_value_t = warpdiff::features::DEFAULT_PROJECTED_DIM)]
    pub projected_dim: usize,
    #[arg(long, default_value_t = DEFAULT_EXTRACTOR_SEED)]
    pub extractor_seed: u64,
}

impl ModelArgs {
    pub fn architecture(&self) -> Architecture {
        Architecture {
            layers: self.layers,
            hidden_channels: self.hidden_channels,
            feature_channels: self.feature_channels,
            projected_dim: self.projected_dim,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimArgs {
    #[arg(long, value_enum, default_value_t = OptimizerKind::Sgd)]
    pub optimizer: OptimizerKind,
    #[arg(long, default_value_t = warpdiff::training::DEFAULT_LEARNING_RATE)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = WeightingKind::Epsilon)]
    pub weighting: WeightingKind,
    /// Fraction of the budget after which the blur surrogate feeds iterative slots.
    #[arg(long, default_value_t = DEFAULT_ENABLE_ITER_AFTER)]
    pub enable_iter_after: f64,
    #[arg(long, default_value_t = warpdiff::training::DEFAULT_TAU_MIN)]
    pub tau_min: f64,
    #[arg(long, default_value_t = warpdiff::training::DEFAULT_TAU_MAX)]
    pub tau_max: f64,
    /// Keep the feature projector fixed.
    #[arg(long)]
    pub freeze_projector: bool,
}

impl OptimArgs {
    pub fn optimizer(&self) -> OptimizerConfig {
        match self.optimizer {
            OptimizerKind::Sgd => OptimizerConfig::Sgd { lr: self.lr },
            OptimizerKind::Adam => OptimizerConfig::adam(self.lr),
        }
    }

    pub fn weighting(&self) -> LossWeighting {
        match self.weighting {
            WeightingKind::Epsilon => LossWeighting::Epsilon,
            WeightingKind::Edm => LossWeighting::Edm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainArgs {
    /// Directory written by make-scenes.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "ray")]
    pub mode: ConditioningMode,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint path; `loss.csv` and `run_config.json` go next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss CSV rows average this many steps.
    #[arg(long, default_value_t = 50)]
    pub log_every: usize,
    /// Fixed draws scored at every loss CSV row.
    #[arg(long, default_value_t = 16)]
    pub val_samples: usize,
    /// Noise levels T of the training schedule.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub diffusion_steps: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleArgs {
    /// Scene JSON written by make-scenes.
    #[arg(long)]
    pub scene: PathBuf,
    /// Trained checkpoint; omit together with --oracle.
    #[arg(long, required_unless_present = "oracle", conflicts_with = "oracle")]
    pub checkpoint: Option<PathBuf>,
    /// Use the closed-form Gaussian denoiser centered on each target's render.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 0.01)]
    pub oracle_variance: f64,
    #[arg(long, default_value = "ray")]
    pub mode: ConditioningMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Save x̂0 every 10 steps under `intermediates/`.
    #[arg(long)]
    pub dump_intermediates: bool,
    /// Denoising steps T.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// Extractor and projector shape used with --oracle.
    #[arg(long, default_value_t = 64)]
    pub feature_channels: usize,
    #[arg(long, default_value_t = warpdiff::features::DEFAULT_PROJECTED_DIM)]
    pub projected_dim: usize,
    #[arg(long, default_value_t = DEFAULT_EXTRACTOR_SEED)]
    pub extractor_seed: u64,
    #[command(flatten)]
    pub trajectory: TrajectoryArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateArgs {
    /// Directory with generated `frames/`.
    #[arg(long)]
    pub gen: PathBuf,
    /// Directory with ground-truth `frames/`.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub poses_gen: PathBuf,
    #[arg(long)]
    pub poses_gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Name written in the video column; defaults to the generated directory name.
    #[arg(long)]
    pub video: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateArgs {
    /// Training scenes from make-scenes; random scenes are generated when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated modes.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "ray,warp-rgb,warp-feat,iter-feat"
    )]
    pub modes: Vec<ConditioningMode>,
    /// Training steps per mode.
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub train_scenes: usize,
    #[arg(long, default_value_t = 20)]
    pub heldout_scenes: usize,
    #[arg(long, default_value_t = 32)]
    pub resolution: usize,
    #[arg(long, default_value_t = 40.0)]
    pub span_deg: f64,
    #[arg(long, default_value_t = 5)]
    pub frames: usize,
    /// Denoising steps used when sampling held-out views.
    #[arg(long, default_value_t = 25)]
    pub eval_steps: usize,
    /// Noise levels T of the training schedule.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub diffusion_steps: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayArgs {
    /// A run_config.json written by an earlier command.
    pub config: PathBuf,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub command: Command,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            version: 1,
            command,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::Error::new(e).context(format!("reading {}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
            anyhow::Error::new(warpdiff::Error::from(e))
                .context(format!("parsing {}", path.display()))
        })?;
        if cfg.version != 1 {
            return Err(crate::usage(format!(
                "unsupported run_config version {}",
                cfg.version
            )));
        }
        Ok(cfg)
    }
}
