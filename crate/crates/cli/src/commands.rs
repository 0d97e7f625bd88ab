use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use rayon::prelude::*;
use warpdiff::diffusion::{
    ConditioningMode, Denoiser, FrameSample, GaussianOracleDenoiser, NoiseSchedule, SourceView,
    TrajectorySampler,
};
use warpdiff::features::{ChannelProjector, ToyExtractor};
use warpdiff::geometry::{Camera, FeatureImage, RenderMask};
use warpdiff::io::{
    read_cameras, read_frame, write_atomic, write_cameras, write_fimg, write_mask_png, write_png,
};
use warpdiff::metrics::{
    drift_from_qualities, frame_quality, pose_errors, psnr, ssim, PoseSequence,
};
use warpdiff::scenes::{random_scene, render_views, scene_cameras, SceneSpec, TrajectorySpec};
use warpdiff::training::{
    run_ablation, run_ablation_on, scene_set, train_denoiser, validation_loss, AblationConfig,
    AblationRow, TinyDenoiser, TrainConfig, ViewSampling, HELDOUT_SCENE_BASE,
};

use crate::config::{
    AblateArgs, Command, EvaluateArgs, MakeScenesArgs, ModelArgs, OptimArgs, RunConfig, SampleArgs,
    ScheduleArgs, TrainArgs, RUN_CONFIG,
};
use crate::data::{self, frame_stem, Manifest, ManifestEntry, MANIFEST};
use crate::usage;

pub fn run(command: &Command, parallel: bool) -> anyhow::Result<()> {
    match command {
        Command::MakeScenes(a) => make_scenes(a, command),
        Command::Train(a) => train(a, command),
        Command::Sample(a) => sample(a, command, parallel),
        Command::Evaluate(a) => evaluate(a, command),
        Command::Ablate(a) => ablate(a, command),
        Command::Replay(a) => {
            let cfg = RunConfig::load(&a.config)?;
            if matches!(cfg.command, Command::Replay(_)) {
                return Err(usage("a run config cannot replay another replay"));
            }
            run(&cfg.command, parallel)
        }
    }
}

fn write_run_config(dir: &Path, command: &Command) -> anyhow::Result<()> {
    let json = RunConfig::new(command.clone())
        .to_json()
        .map_err(warpdiff::Error::from)?;
    write_atomic(dir.join(RUN_CONFIG), json.as_bytes())
        .with_context(|| format!("writing {}", dir.join(RUN_CONFIG).display()))?;
    Ok(())
}

fn write_frame(dir: &Path, stem: &str, img: &FeatureImage<f32>) -> warpdiff::Result<()> {
    write_png(dir.join(format!("{stem}.png")), img)?;
    write_fimg(dir.join(format!("{stem}.fimg")), img)
}

/// Cameras are built in f64 for the written pose files and cast for rendering.
fn trajectory_cameras(
    spec: &SceneSpec,
    traj: &TrajectorySpec,
    res: usize,
) -> warpdiff::Result<(Vec<Camera<f32>>, Vec<Camera<f64>>)> {
    let cams64 = scene_cameras::<f64>(spec, traj, res, res)?;
    let cams = cams64.iter().map(Camera::cast).collect::<Vec<_>>();
    for cam in &cams {
        cam.validate()?;
    }
    Ok((cams, cams64))
}

fn make_scenes(a: &MakeScenesArgs, command: &Command) -> anyhow::Result<()> {
    let res = a.trajectory.resolution;
    if res == 0 {
        return Err(usage("resolution must be positive"));
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_run_config(&a.out, command)?;
    let entries = (0..a.count)
        .into_par_iter()
        .map(|i| -> anyhow::Result<ManifestEntry> {
            let seed = a.seed.wrapping_add(i as u64);
            let spec = random_scene(seed);
            let traj = TrajectorySpec {
                kind: a.trajectory.kind(spec.view.distance)?,
                frame_count: a.trajectory.frames,
            };
            let (cams, cams64) = trajectory_cameras(&spec, &traj, res)?;
            let name = format!("scene_{i}");
            let dir = a.out.join(&name);
            write_atomic(
                a.out.join(format!("{name}.json")),
                spec.to_json()?.as_bytes(),
            )?;
            for (j, view) in render_views(&spec, &cams).iter().enumerate() {
                let stem = frame_stem(j);
                write_frame(&dir.join("frames"), &stem, &view.rgb)?;
                write_fimg(dir.join("depth").join(format!("{stem}.fimg")), &view.depth)?;
            }
            write_cameras(dir.join("cameras.json"), &cams64)?;
            Ok(ManifestEntry {
                index: i,
                seed,
                spec: format!("{name}.json"),
                dir: name,
                frames: cams.len(),
                trajectory: traj.kind,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let manifest = Manifest {
        resolution: res,
        scenes: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(warpdiff::Error::from)?;
    write_atomic(a.out.join(MANIFEST), json.as_bytes())?;
    Ok(())
}

fn train_config(
    mode: ConditioningMode,
    steps: usize,
    seed: u64,
    diffusion_steps: usize,
    model: &ModelArgs,
    optim: &OptimArgs,
    schedule: &ScheduleArgs,
) -> anyhow::Result<TrainConfig> {
    let cfg = TrainConfig {
        mode,
        schedule: schedule.config(diffusion_steps),
        tau_min: optim.tau_min,
        tau_max: optim.tau_max,
        steps,
        seed,
        batch_size: optim.batch_size,
        optimizer: optim.optimizer(),
        weighting: optim.weighting(),
        enable_iter_after: optim.enable_iter_after,
        architecture: model.architecture(),
        extractor_seed: model.extractor_seed,
        train_projector: !optim.freeze_projector,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Validation draws are seeded separately from the training stream.
const VALIDATION_SEED_OFFSET: u64 = 0x5A11_D000;

/// Loss curve rows: steps completed, mean training loss over the window,
/// loss on the fixed validation draws. The first row is the initialization.
struct LossCurve {
    every: usize,
    rows: Vec<(usize, Option<f64>, f64)>,
    window: Vec<f64>,
}

impl LossCurve {
    fn new(every: usize) -> Self {
        LossCurve {
            every: every.max(1),
            rows: Vec::new(),
            window: Vec::new(),
        }
    }

    fn push(&mut self, loss: f64) -> bool {
        self.window.push(loss);
        self.window.len() == self.every
    }

    fn close(&mut self, steps: usize, val: f64) {
        let mean = (!self.window.is_empty())
            .then(|| self.window.iter().sum::<f64>() / self.window.len() as f64);
        self.rows.push((steps, mean, val));
        self.window.clear();
    }

    fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,val_loss\n");
        for (step, loss, val) in &self.rows {
            let loss = loss.map(|l| l.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{step},{loss},{val}");
        }
        out
    }
}

fn train(a: &TrainArgs, command: &Command) -> anyhow::Result<()> {
    let cfg = train_config(
        a.mode,
        a.steps,
        a.seed,
        a.diffusion_steps,
        &a.model,
        &a.optim,
        &a.schedule,
    )?;
    if a.val_samples == 0 {
        return Err(usage("--val-samples must be at least 1"));
    }
    let out_dir = data::output_dir(&a.out);
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_run_config(&out_dir, command)?;
    let videos = data::load_dataset(&a.data)?;
    let val_seed = a.seed ^ VALIDATION_SEED_OFFSET;
    let mut curve = LossCurve::new(a.log_every);
    let (model, _) = if a.steps == 0 {
        train_denoiser::<f32>(&videos, &cfg, |_, _, _| Ok(()))?
    } else {
        let init = TinyDenoiser::<f32>::seeded(&cfg.architecture, cfg.seed)?;
        curve.close(
            0,
            validation_loss(&init, &videos, &cfg, a.val_samples, val_seed)?,
        );
        train_denoiser::<f32>(&videos, &cfg, |step, loss, model| {
            if curve.push(loss) || step + 1 == cfg.steps {
                curve.close(
                    step + 1,
                    validation_loss(model, &videos, &cfg, a.val_samples, val_seed)?,
                );
            }
            Ok(())
        })?
    };
    model
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    write_atomic(out_dir.join("loss.csv"), curve.to_csv().as_bytes())?;
    Ok(())
}

fn sample(a: &SampleArgs, command: &Command, parallel: bool) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.scene)
        .with_context(|| format!("reading {}", a.scene.display()))?;
    let spec =
        SceneSpec::from_json(&text).with_context(|| format!("parsing {}", a.scene.display()))?;
    let res = a.trajectory.resolution;
    let traj = TrajectorySpec {
        kind: a.trajectory.kind(spec.view.distance)?,
        frame_count: a.trajectory.frames,
    };
    let (cams, cams64) = trajectory_cameras(&spec, &traj, res)?;
    let schedule = NoiseSchedule::<f32>::karras(a.schedule.config(a.steps))?;
    let model = a
        .checkpoint
        .as_ref()
        .map(|p| TinyDenoiser::<f32>::load(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_run_config(&a.out, command)?;

    let source = render_views(&spec, &cams[..1]).remove(0);
    let targets = &cams[1..];
    let record_every = a.dump_intermediates.then_some(10);
    let frames = match &model {
        Some(model) => {
            let extractor =
                ToyExtractor::<f32>::seeded(model.projector().input_dim(), a.extractor_seed);
            let sampler = TrajectorySampler {
                denoiser: model,
                schedule: &schedule,
                mode: a.mode,
                extractor: &extractor,
                projector: model.projector(),
                parallel,
                record_every,
            };
            sampler.sample(&source, targets, a.seed)?
        }
        None => oracle_frames(
            a,
            &spec,
            &source,
            targets,
            &schedule,
            parallel,
            record_every,
        )?,
    };

    let out = &a.out;
    write_frame(&out.join("frames"), &frame_stem(0), &source.rgb)?;
    write_mask_png(
        out.join("masks").join("0.png"),
        &RenderMask::new(res, res, true),
    )?;
    for (k, f) in frames.iter().enumerate() {
        let stem = frame_stem(k + 1);
        write_frame(&out.join("frames"), &stem, &f.image)?;
        write_mask_png(out.join("masks").join(format!("{stem}.png")), &f.mask)?;
        for (step, x0) in &f.intermediates {
            write_frame(
                &out.join("intermediates").join(&stem),
                &step.to_string(),
                x0,
            )?;
        }
    }
    write_cameras(out.join("cameras.json"), &cams64)?;
    Ok(())
}

/// Each target gets a Gaussian oracle centered on its own render; target
/// `k` uses seed `seed + k`, matching the trained-model path.
fn oracle_frames(
    a: &SampleArgs,
    spec: &SceneSpec,
    source: &SourceView<f32>,
    targets: &[Camera<f32>],
    schedule: &NoiseSchedule<f32>,
    parallel: bool,
    record_every: Option<usize>,
) -> anyhow::Result<Vec<FrameSample<f32>>> {
    if !(a.oracle_variance > 0.0) {
        return Err(usage("oracle variance must be positive"));
    }
    let extractor = ToyExtractor::<f32>::seeded(a.feature_channels, a.extractor_seed);
    let projector =
        ChannelProjector::<f32>::seeded(a.feature_channels, a.projected_dim, a.extractor_seed)?;
    let one = |(k, cam): (usize, &Camera<f32>)| -> anyhow::Result<FrameSample<f32>> {
        let mean = render_views(spec, std::slice::from_ref(cam)).remove(0).rgb;
        let oracle = GaussianOracleDenoiser::isotropic(mean, a.oracle_variance as f32)?;
        let sampler = TrajectorySampler {
            denoiser: &oracle as &dyn Denoiser<f32>,
            schedule,
            mode: a.mode,
            extractor: &extractor,
            projector: &projector,
            parallel: false,
            record_every,
        };
        Ok(sampler
            .sample(
                source,
                std::slice::from_ref(cam),
                a.seed.wrapping_add(k as u64),
            )?
            .remove(0))
    };
    if parallel {
        targets.par_iter().enumerate().map(one).collect()
    } else {
        targets.iter().enumerate().map(one).collect()
    }
}

fn read_frames(dir: &Path) -> anyhow::Result<Vec<FeatureImage<f64>>> {
    let n = data::count_frames(dir);
    if n == 0 {
        return Err(usage(format!(
            "no frames found under {}",
            dir.join("frames").display()
        )));
    }
    (0..n)
        .map(|j| {
            read_frame(dir.join("frames"), &frame_stem(j))
                .with_context(|| format!("reading frame {j} of {}", dir.display()))
        })
        .collect()
}

fn read_poses(path: &Path, what: &str) -> anyhow::Result<PoseSequence<f64>> {
    if !path.exists() {
        return Err(anyhow::Error::new(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{what} pose file not found: {}", path.display()),
        )));
    }
    let cams = read_cameras::<f64>(path)
        .with_context(|| format!("reading {what} poses {}", path.display()))?;
    Ok(PoseSequence::from_cameras(&cams)?)
}

fn evaluate(a: &EvaluateArgs, command: &Command) -> anyhow::Result<()> {
    let poses_gen = read_poses(&a.poses_gen, "generated")?;
    let poses_gt = read_poses(&a.poses_gt, "ground-truth")?;
    let gen = read_frames(&a.gen)?;
    let gt = read_frames(&a.gt)?;
    if gen.len() != gt.len() {
        return Err(usage(format!(
            "{} has {} frames but {} has {}",
            a.gen.display(),
            gen.len(),
            a.gt.display(),
            gt.len()
        )));
    }
    if poses_gen.len() != gen.len() || poses_gt.len() != gen.len() {
        return Err(usage(format!(
            "pose files list {} and {} cameras for {} frames",
            poses_gen.len(),
            poses_gt.len(),
            gen.len()
        )));
    }
    if gen.len() < 2 {
        return Err(usage("evaluation needs at least two frames"));
    }
    let out_dir = data::output_dir(&a.out);
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_run_config(&out_dir, command)?;

    let video = a.video.clone().unwrap_or_else(|| {
        a.gen
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "video".into())
    });
    let errors = pose_errors(&poses_gen, &poses_gt)?;
    let mut csv = String::from("video,frame,psnr,ssim,imq,drift,re_deg,te\n");
    let mut sums = [0.0; 5];
    let mut qualities = Vec::with_capacity(gen.len());
    for (j, ((g, t), (re, te))) in gen.iter().zip(&gt).zip(&errors).enumerate() {
        let row = [psnr(g, t)?, ssim(g, t)?, frame_quality(g), *re, *te];
        qualities.push(row[2]);
        sums.iter_mut().zip(row).for_each(|(s, v)| *s += v);
        let _ = writeln!(
            csv,
            "{video},{j},{},{},{},,{},{}",
            row[0], row[1], row[2], row[3], row[4]
        );
    }
    let n = gen.len() as f64;
    let drift = drift_from_qualities(&qualities)?;
    let m = sums.map(|s| s / n);
    let _ = writeln!(
        csv,
        "{video},mean,{},{},{},{drift},{},{}",
        m[0], m[1], m[2], m[3], m[4]
    );
    write_atomic(&a.out, csv.as_bytes()).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn ablation_config(a: &AblateArgs) -> anyhow::Result<AblationConfig> {
    if a.modes.is_empty() {
        return Err(usage("at least one mode is required"));
    }
    let train = train_config(
        ConditioningMode::RayOnly,
        a.budget,
        a.seed,
        a.diffusion_steps,
        &a.model,
        &a.optim,
        &a.schedule,
    )?;
    Ok(AblationConfig {
        modes: a.modes.clone(),
        train,
        views: ViewSampling {
            resolution: a.resolution,
            span_deg: a.span_deg,
            frame_count: a.frames,
        },
        train_scenes: a.train_scenes,
        train_scene_base: 0,
        heldout_scenes: a.heldout_scenes,
        heldout_scene_base: HELDOUT_SCENE_BASE,
        eval_schedule: a.schedule.config(a.eval_steps),
    })
}

/// Timing is left out so the table is reproducible.
fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("mode,mse,psnr,ssim,drift,final_loss\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.mode, r.mse, r.psnr, r.ssim, r.drift, r.final_loss
        );
    }
    out
}

fn ablate(a: &AblateArgs, command: &Command) -> anyhow::Result<()> {
    let cfg = ablation_config(a)?;
    let out_dir = data::output_dir(&a.out);
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_run_config(&out_dir, command)?;
    let rows = match &a.data {
        Some(dir) => {
            let train_videos = data::load_dataset(dir)?;
            let heldout = scene_set(cfg.heldout_scene_base, cfg.heldout_scenes)
                .iter()
                .map(|s| cfg.views.render::<f32>(s))
                .collect::<warpdiff::Result<Vec<_>>>()?;
            run_ablation_on(&train_videos, &heldout, &cfg, a.seed, |_| {})?
        }
        None => run_ablation::<f32>(&cfg, a.seed, |_| {})?,
    };
    write_atomic(&a.out, ablation_csv(&rows).as_bytes())
        .with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_curve_averages_windows() {
        let mut c = LossCurve::new(2);
        c.close(0, 0.5);
        for (i, l) in [1.0, 3.0, 5.0, 7.0, 9.0].into_iter().enumerate() {
            if c.push(l) || i == 4 {
                c.close(i + 1, 0.25);
            }
        }
        assert_eq!(
            c.to_csv(),
            "step,loss,val_loss\n0,,0.5\n2,2,0.25\n4,6,0.25\n5,9,0.25\n"
        );
    }

    #[test]
    fn empty_curve_has_header() {
        assert_eq!(LossCurve::new(50).to_csv(), "step,loss,val_loss\n");
    }
}
