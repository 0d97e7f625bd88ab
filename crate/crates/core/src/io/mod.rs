//! File formats: FIMG tensors, PLY clouds, PNG frames, camera JSON.

mod fimg;
mod ply;

use std::io::Write;
use std::path::Path;

pub use fimg::{decode_fimg, encode_fimg, read_fimg, FIMG_MAGIC};
pub use ply::{decode_ply, encode_ply, read_ply};

use crate::error::{Error, Result};
use crate::geometry::{Camera, FeatureImage, RenderMask};
use crate::scalar::Real;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_fimg<T: Real>(path: impl AsRef<Path>, img: &FeatureImage<T>) -> Result<()> {
    write_atomic(path, &encode_fimg(img))
}

/// 8-bit PNG of a 1- or 3-channel image, values clamped to `[0, 1]`.
pub fn encode_png<T: Real>(img: &FeatureImage<T>) -> Result<Vec<u8>> {
    let color = match img.channels() {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => {
            return Err(Error::InvalidArgument(format!(
                "PNG needs 1 or 3 channels, got {c}"
            )))
        }
    };
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|v| {
            let v = v.to_f64_lossy();
            let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            (v * 255.0).round() as u8
        })
        .collect();
    let mut out = Vec::new();
    let enc = image::codecs::png::PngEncoder::new(&mut out);
    image::ImageEncoder::write_image(enc, &bytes, img.width() as u32, img.height() as u32, color)?;
    Ok(out)
}

pub fn write_png<T: Real>(path: impl AsRef<Path>, img: &FeatureImage<T>) -> Result<()> {
    write_atomic(path, &encode_png(img)?)
}

pub fn write_mask_png(path: impl AsRef<Path>, mask: &RenderMask) -> Result<()> {
    write_png(path, &mask.to_image::<f32>())
}

/// Reads an 8-bit PNG as an RGB image in `[0, 1]`.
pub fn read_png<T: Real>(path: impl AsRef<Path>) -> Result<FeatureImage<T>> {
    let rgb = image::open(path)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb
        .into_raw()
        .into_iter()
        .map(|b| T::lit(b as f64 / 255.0))
        .collect();
    FeatureImage::from_vec(h as usize, w as usize, 3, data)
}

/// Reads `stem.fimg` when present, otherwise `stem.png`.
pub fn read_frame<T: Real>(dir: impl AsRef<Path>, stem: &str) -> Result<FeatureImage<T>> {
    let dir = dir.as_ref();
    let fimg = dir.join(format!("{stem}.fimg"));
    if fimg.exists() {
        read_fimg(fimg)
    } else {
        read_png(dir.join(format!("{stem}.png")))
    }
}

pub fn write_cameras<T: Real>(path: impl AsRef<Path>, cams: &[Camera<T>]) -> Result<()> {
    write_atomic(path, crate::geometry::cameras_to_json(cams)?.as_bytes())
}

pub fn read_cameras<T: Real>(path: impl AsRef<Path>) -> Result<Vec<Camera<T>>> {
    crate::geometry::cameras_from_json(&std::fs::read_to_string(path)?)
}
