//! On-disk scene datasets as written by `make-scenes`.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use warpdiff::diffusion::SourceView;
use warpdiff::io::{read_cameras, read_fimg, read_frame};
use warpdiff::scenes::TrajectoryKind;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub index: usize,
    pub seed: u64,
    /// Scene description, relative to the dataset root.
    pub spec: String,
    /// Directory holding `frames/`, `depth/` and `cameras.json`.
    pub dir: String,
    pub frames: usize,
    pub trajectory: TrajectoryKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub resolution: usize,
    pub scenes: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(root: &Path) -> anyhow::Result<Self> {
        let path = root.join(MANIFEST);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(warpdiff::Error::from)
            .with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn frame_stem(j: usize) -> String {
    j.to_string()
}

/// Loads one scene directory as posed RGB-D views.
pub fn load_video(dir: &Path, frames: usize) -> anyhow::Result<Vec<SourceView<f32>>> {
    let cams = read_cameras::<f32>(dir.join("cameras.json"))
        .with_context(|| format!("reading cameras of {}", dir.display()))?;
    if cams.len() != frames {
        return Err(crate::usage(format!(
            "{} lists {} cameras for {frames} frames",
            dir.display(),
            cams.len()
        )));
    }
    cams.into_iter()
        .enumerate()
        .map(|(j, camera)| {
            let stem = frame_stem(j);
            let rgb = read_frame(dir.join("frames"), &stem)
                .with_context(|| format!("reading frame {j} of {}", dir.display()))?;
            let depth = read_fimg(dir.join("depth").join(format!("{stem}.fimg")))
                .with_context(|| format!("reading depth {j} of {}", dir.display()))?;
            Ok(SourceView { rgb, depth, camera })
        })
        .collect()
}

pub fn load_dataset(root: &Path) -> anyhow::Result<Vec<Vec<SourceView<f32>>>> {
    let manifest = Manifest::load(root)?;
    manifest
        .scenes
        .iter()
        .map(|e| load_video(&root.join(&e.dir), e.frames))
        .collect()
}

/// Number of consecutive frames `0, 1, ...` present under `dir/frames`.
pub fn count_frames(dir: &Path) -> usize {
    let frames = dir.join("frames");
    (0..)
        .take_while(|j| {
            let stem = frame_stem(*j);
            frames.join(format!("{stem}.fimg")).exists()
                || frames.join(format!("{stem}.png")).exists()
        })
        .count()
}

/// Directory holding a file output, used for its run config and side files.
pub fn output_dir(file: &Path) -> PathBuf {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}
