//! `FIMG` tensors: magic `FIMG`, then `u32` height, width, channels (little
//! endian), then `height * width * channels` little-endian `f32` values,
//! row-major with channels fastest.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::FeatureImage;
use crate::scalar::Real;

pub const FIMG_MAGIC: &[u8; 4] = b"FIMG";

pub fn encode_fimg<T: Real>(img: &FeatureImage<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + img.data().len() * 4);
    out.extend_from_slice(FIMG_MAGIC);
    for dim in [img.height(), img.width(), img.channels()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in img.data() {
        out.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
    }
    out
}

pub fn decode_fimg<T: Real>(bytes: &[u8]) -> Result<FeatureImage<T>> {
    if bytes.len() < 16 || &bytes[..4] != FIMG_MAGIC {
        return Err(Error::format("FIMG", "missing magic header"));
    }
    let dim =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let n = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| Error::format("FIMG", "dimensions overflow"))?;
    let body = &bytes[16..];
    if body.len() != n * 4 {
        return Err(Error::format(
            "FIMG",
            format!(
                "expected {} payload bytes for {h}x{w}x{c}, found {}",
                n * 4,
                body.len()
            ),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| T::lit(f32::from_le_bytes(b.try_into().unwrap()) as f64))
        .collect();
    FeatureImage::from_vec(h, w, c, data).map_err(|e| Error::format("FIMG", e.to_string()))
}

pub fn read_fimg<T: Real>(path: impl AsRef<Path>) -> Result<FeatureImage<T>> {
    decode_fimg(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let img = FeatureImage::<f64>::from_fn(2, 3, 1, |y, x, _| (y * 3 + x) as f64);
        let bytes = encode_fimg(&img);
        assert_eq!(&bytes[..4], b"FIMG");
        assert_eq!(&bytes[4..16], &[2, 0, 0, 0, 3, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[16 + 4 * 5..], &5.0f32.to_le_bytes());
    }

    #[test]
    fn rejects_truncation_and_bad_magic() {
        let mut bytes = encode_fimg(&FeatureImage::<f32>::filled(2, 2, 2, 1.0));
        bytes.pop();
        assert!(decode_fimg::<f32>(&bytes).is_err());
        assert!(decode_fimg::<f32>(b"FIMX\0\0\0\0\0\0\0\0\0\0\0\0").is_err());
    }

    #[test]
    fn infinity_survives() {
        let img = FeatureImage::<f64>::filled(1, 2, 1, f64::INFINITY);
        let back: FeatureImage<f64> = decode_fimg(&encode_fimg(&img)).unwrap();
        assert!(back.data().iter().all(|v| v.is_infinite()));
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless_for_f32(h in 1usize..5, w in 1usize..5, c in 1usize..4, seed in any::<u64>()) {
            let img = FeatureImage::<f32>::from_fn(h, w, c, |y, x, ch| {
                ((seed as f64 * 1e-9 + (y * 31 + x * 7 + ch) as f64).sin() * 1e3) as f32
            });
            let back: FeatureImage<f32> = decode_fimg(&encode_fimg(&img)).unwrap();
            prop_assert_eq!(back, img);
        }
    }
}
