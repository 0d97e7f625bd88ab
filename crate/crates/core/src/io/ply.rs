//! Binary little-endian PLY with `x y z f0 .. f{C-1}` float properties.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{FeaturePointCloud, Vec3};
use crate::scalar::Real;

pub fn encode_ply<T: Real>(cloud: &FeaturePointCloud<T>) -> Vec<u8> {
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        cloud.len()
    );
    for c in 0..cloud.channels() {
        header.push_str(&format!("property float f{c}\n"));
    }
    header.push_str("end_header\n");
    let mut out = header.into_bytes();
    for (i, p) in cloud.positions().iter().enumerate() {
        for v in p.0.iter().chain(cloud.feature(i)) {
            out.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
        }
    }
    out
}

pub fn decode_ply<T: Real>(bytes: &[u8]) -> Result<FeaturePointCloud<T>> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::format("PLY", "missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end])
        .map_err(|_| Error::format("PLY", "header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(Error::format("PLY", "missing ply magic"));
    }
    let mut count = None;
    let mut props = Vec::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, _] => {
                return Err(Error::format("PLY", format!("unsupported format {other}")))
            }
            ["element", "vertex", n] => {
                count = Some(
                    n.parse::<usize>()
                        .map_err(|_| Error::format("PLY", "bad vertex count"))?,
                )
            }
            ["property", "float", name] => props.push(name.to_string()),
            ["property", ty, _] => {
                return Err(Error::format(
                    "PLY",
                    format!("unsupported property type {ty}"),
                ))
            }
            ["comment", ..] | [] => {}
            _ => {
                return Err(Error::format(
                    "PLY",
                    format!("unexpected header line '{line}'"),
                ))
            }
        }
    }
    let count = count.ok_or_else(|| Error::format("PLY", "no vertex element"))?;
    let channels = props.len().saturating_sub(3);
    let expected: Vec<String> = ["x", "y", "z"]
        .iter()
        .map(|s| s.to_string())
        .chain((0..channels).map(|c| format!("f{c}")))
        .collect();
    if props != expected || channels == 0 {
        return Err(Error::format(
            "PLY",
            format!("expected properties x,y,z,f0..; got {props:?}"),
        ));
    }
    let body = &bytes[end + END.len()..];
    let stride = props.len() * 4;
    if body.len() != count * stride {
        return Err(Error::format("PLY", "vertex payload length mismatch"));
    }
    let mut cloud = FeaturePointCloud::empty(channels);
    let mut feat = vec![T::zero(); channels];
    for rec in body.chunks_exact(stride) {
        let vals: Vec<T> = rec
            .chunks_exact(4)
            .map(|b| T::lit(f32::from_le_bytes(b.try_into().unwrap()) as f64))
            .collect();
        feat.copy_from_slice(&vals[3..]);
        cloud.push(Vec3([vals[0], vals[1], vals[2]]), &feat);
    }
    Ok(cloud)
}

pub fn read_ply<T: Real>(path: impl AsRef<Path>) -> Result<FeaturePointCloud<T>> {
    decode_ply(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let cloud = FeaturePointCloud::<f32>::new(
            vec![Vec3::new(1.0, -2.0, 3.5), Vec3::new(0.0, 0.25, 9.0)],
            2,
            vec![0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        let bytes = encode_ply(&cloud);
        assert!(bytes.starts_with(b"ply\nformat binary_little_endian 1.0\nelement vertex 2\n"));
        assert_eq!(decode_ply::<f32>(&bytes).unwrap(), cloud);
    }

    #[test]
    fn rejects_ascii() {
        let text = b"ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nend_header\n";
        assert!(decode_ply::<f64>(text).is_err());
    }
}
