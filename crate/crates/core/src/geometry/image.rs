use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense `height x width x channels` grid, row-major with channels fastest.
///
/// Used for RGB frames (3 channels), depth maps (1), ray maps (6) and
/// semantic feature maps.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureImage<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> FeatureImage<T> {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, T::zero())
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: T) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "empty image");
        FeatureImage {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Wraps raw data without the finiteness check (depth maps hold `+inf`).
    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(
                format!("{} values", height * width * channels),
                format!("{} values", data.len()),
            ));
        }
        Ok(FeatureImage {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut img = Self::zeros(height, width, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    img.data[(y * width + x) * channels + c] = f(y, x, c);
                }
            }
        }
        img
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: T) {
        let i = self.index(y, x, c);
        self.data[i] = v;
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[T] {
        let i = self.index(y, x, 0);
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, y: usize, x: usize) -> &mut [T] {
        let i = self.index(y, x, 0);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.channels)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    pub fn same_spatial(&self, other_h: usize, other_w: usize) -> bool {
        self.height == other_h && self.width == other_w
    }

    pub fn ensure_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(())
    }

    pub fn ensure_channels(&self, channels: usize) -> Result<()> {
        if self.channels != channels {
            return Err(Error::shape(
                format!("{channels} channels"),
                format!("{} channels", self.channels),
            ));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        FeatureImage {
            data: self.data.iter().map(|&v| f(v)).collect(),
            height: self.height,
            width: self.width,
            channels: self.channels,
        }
    }

    /// Element-wise combination of two same-shaped images.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.ensure_shape(other)?;
        Ok(FeatureImage {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            height: self.height,
            width: self.width,
            channels: self.channels,
        })
    }

    /// Copies channels `start..start+count` into a new image.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Self> {
        if count == 0 || start + count > self.channels {
            return Err(Error::InvalidArgument(format!(
                "channel range {start}..{} out of 0..{}",
                start + count,
                self.channels
            )));
        }
        let mut data = Vec::with_capacity(self.pixel_count() * count);
        for px in self.pixels() {
            data.extend_from_slice(&px[start..start + count]);
        }
        Self::from_vec(self.height, self.width, count, data)
    }

    /// Stacks images along the channel axis.
    pub fn concat_channels(parts: &[&Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let (h, w) = (first.height, first.width);
        let mut channels = 0;
        for p in parts {
            if !p.same_spatial(h, w) {
                return Err(Error::shape(
                    format!("{h}x{w}"),
                    format!("{}x{}", p.height, p.width),
                ));
            }
            channels += p.channels;
        }
        let mut data = Vec::with_capacity(h * w * channels);
        for i in 0..h * w {
            for p in parts {
                data.extend_from_slice(&p.data[i * p.channels..(i + 1) * p.channels]);
            }
        }
        Self::from_vec(h, w, channels, data)
    }

    /// Mirrors the image left to right.
    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.height, self.width, self.channels, |y, x, c| {
            self.get(y, self.width - 1 - x, c)
        })
    }

    pub fn cast<U: Real>(&self) -> FeatureImage<U> {
        FeatureImage {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }

    pub fn mean_squared_error(&self, other: &Self) -> Result<T> {
        self.ensure_shape(other)?;
        let sum: T = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        Ok(sum / T::lit(self.data.len() as f64))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.ensure_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }
}

/// Binary per-pixel coverage mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl RenderMask {
    pub fn new(height: usize, width: usize, value: bool) -> Self {
        assert!(height > 0 && width > 0, "empty mask");
        RenderMask {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::new(height, width, false);
        for y in 0..height {
            for x in 0..width {
                m.data[y * width + x] = f(y, x);
            }
        }
        m
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width || height == 0 || width == 0 {
            return Err(Error::shape(
                format!("{height}x{width} mask"),
                format!("{} entries", data.len()),
            ));
        }
        Ok(RenderMask {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn covered(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn invert(&self) -> Self {
        RenderMask {
            data: self.data.iter().map(|b| !b).collect(),
            ..self.clone()
        }
    }

    pub fn ensure_matches<T: Real>(&self, img: &FeatureImage<T>) -> Result<()> {
        if !img.same_spatial(self.height, self.width) {
            return Err(Error::shape(
                format!("{}x{} (mask)", self.height, self.width),
                format!("{}x{}", img.height(), img.width()),
            ));
        }
        Ok(())
    }

    /// One-channel image holding 0/1.
    pub fn to_image<T: Real>(&self) -> FeatureImage<T> {
        FeatureImage::from_fn(self.height, self.width, 1, |y, x, _| {
            if self.get(y, x) {
                T::one()
            } else {
                T::zero()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_channel_fastest() {
        let img = FeatureImage::<f64>::from_fn(2, 3, 2, |y, x, c| (y * 100 + x * 10 + c) as f64);
        assert_eq!(img.data()[0..4], [0.0, 1.0, 10.0, 11.0]);
        assert_eq!(img.get(1, 2, 1), 121.0);
        assert_eq!(img.pixel(1, 0), &[100.0, 101.0]);
    }

    #[test]
    fn concat_then_slice_recovers_parts() {
        let a = FeatureImage::<f64>::from_fn(2, 2, 1, |y, x, _| (y + x) as f64);
        let b = FeatureImage::<f64>::from_fn(2, 2, 2, |y, x, c| (y * x + c) as f64 + 0.5);
        let ab = FeatureImage::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(ab.channels(), 3);
        assert_eq!(ab.slice_channels(0, 1).unwrap(), a);
        assert_eq!(ab.slice_channels(1, 2).unwrap(), b);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(FeatureImage::<f32>::from_vec(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(FeatureImage::<f32>::from_vec(0, 2, 1, vec![]).is_err());
    }
}
