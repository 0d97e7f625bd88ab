//! The trainable conditional denoiser and its checkpoint format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{ConvLayer, ConvNet, ForwardTrace, LayerGrad};
use crate::diffusion::{ConditioningBundle, ConditioningLayout, Denoiser};
use crate::error::{Error, Result};
use crate::features::ChannelProjector;
use crate::geometry::FeatureImage;
use crate::scalar::Real;

pub const SIGMA_DATA: f64 = 0.5;
pub const MAX_PARAMETERS: usize = 100_000;
pub const MAX_HIDDEN_CHANNELS: usize = 32;
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TDNZ";

/// Output and network-input scalings for noise level `sigma`.
///
/// The network `F` sees `c_in x` plus a constant `ln(sigma) / 4` plane and the
/// noise estimate is `skip x - out F`, which equals `(x - D) / sigma` for the
/// usual denoiser `D = c_skip x + c_out F`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preconditioning<T> {
    pub c_in: T,
    pub c_noise: T,
    pub skip: T,
    pub out: T,
}

impl<T: Real> Preconditioning<T> {
    pub fn new(sigma: T) -> Self {
        let sd = T::lit(SIGMA_DATA);
        let total = sigma * sigma + sd * sd;
        Preconditioning {
            c_in: T::one() / total.sqrt(),
            c_noise: sigma.ln() / T::lit(4.0),
            skip: sigma / total,
            out: sd / total.sqrt(),
        }
    }
}

/// Shape of a [`TinyDenoiser`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    /// Number of 3x3 convolutions (3 or 4).
    pub layers: usize,
    pub hidden_channels: usize,
    /// Raw extractor channels entering the projector.
    pub feature_channels: usize,
    /// Projected feature channels per conditioning slot.
    pub projected_dim: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            layers: 4,
            hidden_channels: 16,
            feature_channels: 64,
            projected_dim: crate::features::DEFAULT_PROJECTED_DIM,
        }
    }
}

impl Architecture {
    pub fn layout(&self) -> ConditioningLayout {
        ConditioningLayout::new(self.projected_dim)
    }

    /// Noisy image, conditioning stack, noise-level plane.
    pub fn input_channels(&self) -> usize {
        3 + self.layout().channels() + 1
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_channels()];
        w.extend(std::iter::repeat_n(self.hidden_channels, self.layers - 1));
        w.push(3);
        w
    }

    pub fn validate(&self) -> Result<()> {
        if !(3..=4).contains(&self.layers) {
            return Err(Error::InvalidArgument(format!(
                "layers must be 3 or 4, got {}",
                self.layers
            )));
        }
        if self.hidden_channels == 0 || self.hidden_channels > MAX_HIDDEN_CHANNELS {
            return Err(Error::InvalidArgument(format!(
                "hidden channels must be in 1..={MAX_HIDDEN_CHANNELS}, got {}",
                self.hidden_channels
            )));
        }
        if self.projected_dim == 0 || self.projected_dim >= self.feature_channels {
            return Err(Error::InvalidArgument(format!(
                "projected dim {} must be in 1..{}",
                self.projected_dim, self.feature_channels
            )));
        }
        Ok(())
    }
}

/// Conditional noise predictor: a small ReLU ConvNet plus the feature projector.
#[derive(Clone, Debug, PartialEq)]
pub struct TinyDenoiser<T> {
    net: ConvNet<T>,
    projector: ChannelProjector<T>,
}

/// Per-sample loss with gradients for the network and its input channels.
#[derive(Clone, Debug)]
pub struct LossEval<T> {
    pub loss: T,
    pub grads: Vec<LayerGrad<T>>,
    /// Gradient with respect to the assembled network input.
    pub input_grad: FeatureImage<T>,
}

/// Assembles `[c_in x, cond, c_noise]` for a network.
pub fn network_input<T: Real>(
    x: &FeatureImage<T>,
    cond: &FeatureImage<T>,
    sigma: T,
) -> Result<FeatureImage<T>> {
    let pre = Preconditioning::new(sigma);
    let scaled = x.map(|v| v * pre.c_in);
    let plane = FeatureImage::filled(x.height(), x.width(), 1, pre.c_noise);
    FeatureImage::concat_channels(&[&scaled, cond, &plane])
}

/// Preconditioned noise prediction from a network output.
pub fn combine<T: Real>(
    x: &FeatureImage<T>,
    f: &FeatureImage<T>,
    sigma: T,
) -> Result<FeatureImage<T>> {
    let pre = Preconditioning::new(sigma);
    x.zip_map(f, |xv, fv| pre.skip * xv - pre.out * fv)
}

/// `weight * mean((eps_hat - eps)^2)` and its gradients for any network whose
/// output channels match `x`.
pub fn noise_prediction_loss<T: Real>(
    net: &ConvNet<T>,
    x: &FeatureImage<T>,
    cond: &FeatureImage<T>,
    sigma: T,
    eps: &FeatureImage<T>,
    weight: T,
) -> Result<LossEval<T>> {
    x.ensure_shape(eps)?;
    let input = network_input(x, cond, sigma)?;
    let trace: ForwardTrace<T> = net.trace(&input)?;
    let eps_hat = combine(x, trace.output(), sigma)?;
    let n = T::lit(eps.data().len() as f64);
    let mut loss = T::zero();
    let out = Preconditioning::new(sigma).out;
    let mut gout = eps_hat.clone();
    for (g, (&p, &e)) in gout
        .data_mut()
        .iter_mut()
        .zip(eps_hat.data().iter().zip(eps.data()))
    {
        let r = p - e;
        loss += r * r;
        *g = -weight * T::lit(2.0) * r * out / n;
    }
    let mut grads = net.zero_grad();
    let input_grad = net
        .backward(&trace, &gout, &mut grads, true)?
        .expect("input gradient requested");
    Ok(LossEval {
        loss: weight * loss / n,
        grads,
        input_grad,
    })
}

impl<T: Real> TinyDenoiser<T> {
    pub fn seeded(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let net = ConvNet::seeded(&arch.widths(), 3, seed)?;
        let projector = ChannelProjector::seeded(
            arch.feature_channels,
            arch.projected_dim,
            seed ^ 0x5eed_f00d,
        )?;
        Self::from_parts(net, projector)
    }

    pub fn from_parts(net: ConvNet<T>, projector: ChannelProjector<T>) -> Result<Self> {
        let layout = ConditioningLayout::new(projector.output_dim());
        let arch = Architecture {
            layers: net.layers().len(),
            hidden_channels: net.layers()[0].out_channels(),
            feature_channels: projector.input_dim(),
            projected_dim: projector.output_dim(),
        };
        arch.validate()?;
        if net.input_channels() != 3 + layout.channels() + 1 {
            return Err(Error::shape(
                format!("{} network inputs", 3 + layout.channels() + 1),
                net.input_channels().to_string(),
            ));
        }
        if net.output_channels() != 3 {
            return Err(Error::shape(
                "3 network outputs",
                net.output_channels().to_string(),
            ));
        }
        for (i, l) in net.layers().iter().enumerate() {
            if l.kernel() != 3 {
                return Err(Error::InvalidArgument(format!(
                    "layer {i} must be 3x3, got {}",
                    l.kernel()
                )));
            }
            if i + 1 < net.layers().len() && l.out_channels() > MAX_HIDDEN_CHANNELS {
                return Err(Error::InvalidArgument(format!(
                    "layer {i} is wider than {MAX_HIDDEN_CHANNELS}"
                )));
            }
        }
        let d = TinyDenoiser { net, projector };
        if d.param_count() > MAX_PARAMETERS {
            return Err(Error::InvalidArgument(format!(
                "{} parameters exceed the {MAX_PARAMETERS} limit",
                d.param_count()
            )));
        }
        Ok(d)
    }

    pub fn net(&self) -> &ConvNet<T> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut ConvNet<T> {
        &mut self.net
    }

    pub fn projector(&self) -> &ChannelProjector<T> {
        &self.projector
    }

    pub fn projector_mut(&mut self) -> &mut ChannelProjector<T> {
        &mut self.projector
    }

    /// Network and projector weights borrowed together.
    pub fn parts_mut(&mut self) -> (&mut ConvNet<T>, &mut [T]) {
        (&mut self.net, self.projector.weight_mut())
    }

    pub fn layout(&self) -> ConditioningLayout {
        ConditioningLayout::new(self.projector.output_dim())
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count() + self.projector.weight().len()
    }

    pub fn is_finite(&self) -> bool {
        self.net.is_finite() && self.projector.weight().iter().all(|v| v.is_finite())
    }

    /// Checkpoint bytes: the projector as a bias-free 1x1 layer, then each convolution.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        let push_u32 =
            |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
        let push_f32 =
            |out: &mut Vec<u8>, v: &T| out.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
        push_u32(&mut out, self.net.layers().len() + 1);
        push_u32(&mut out, self.projector.input_dim());
        push_u32(&mut out, self.projector.output_dim());
        push_u32(&mut out, 1);
        self.projector
            .weight()
            .iter()
            .for_each(|v| push_f32(&mut out, v));
        (0..self.projector.output_dim()).for_each(|_| push_f32(&mut out, &T::zero()));
        for l in self.net.layers() {
            push_u32(&mut out, l.in_channels());
            push_u32(&mut out, l.out_channels());
            push_u32(&mut out, l.kernel());
            l.weights()
                .iter()
                .chain(l.biases())
                .for_each(|v| push_f32(&mut out, v));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::format("TDNZ", "bad magic"));
        }
        let count = r.u32()? as usize;
        if count < 2 {
            return Err(Error::format(
                "TDNZ",
                format!("expected projector and network layers, found {count}"),
            ));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let (ci, co, k) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
            let n = ci
                .checked_mul(co)
                .and_then(|v| v.checked_mul(k * k))
                .filter(|&n| n <= bytes.len())
                .ok_or_else(|| Error::format("TDNZ", "layer size exceeds file"))?;
            let weights = r.floats(n)?;
            let biases = r.floats(co)?;
            layers.push(ConvLayer::new(ci, co, k, weights, biases)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::format("TDNZ", "trailing bytes"));
        }
        let proj = layers.remove(0);
        if proj.kernel() != 1 || proj.biases().iter().any(|b| *b != T::zero()) {
            return Err(Error::format(
                "TDNZ",
                "first layer must be a bias-free 1x1 projector",
            ));
        }
        let projector = ChannelProjector::new(
            proj.in_channels(),
            proj.out_channels(),
            proj.weights().to_vec(),
        )?;
        Self::from_parts(ConvNet::new(layers)?, projector)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Network input for a noisy image and its conditioning.
    pub fn assemble(
        &self,
        x: &FeatureImage<T>,
        sigma: T,
        cond: &ConditioningBundle<T>,
    ) -> Result<FeatureImage<T>> {
        x.ensure_channels(3)?;
        let stack = cond.to_channels(&self.layout())?;
        if !stack.same_spatial(x.height(), x.width()) {
            return Err(Error::shape(
                format!("{}x{} conditioning", x.height(), x.width()),
                format!("{}x{}", stack.height(), stack.width()),
            ));
        }
        network_input(x, &stack, sigma)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format("TDNZ", "unexpected end of file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn floats<T: Real>(&mut self, n: usize) -> Result<Vec<T>> {
        let raw = self.take(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect())
    }
}

impl<T: Real> Denoiser<T> for TinyDenoiser<T> {
    fn predict_noise(
        &self,
        x: &FeatureImage<T>,
        sigma: T,
        cond: &ConditioningBundle<T>,
    ) -> Result<FeatureImage<T>> {
        let input = self.assemble(x, sigma, cond)?;
        combine(x, &self.net.forward(&input)?, sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Camera;

    fn small_arch() -> Architecture {
        Architecture {
            layers: 3,
            hidden_channels: 4,
            feature_channels: 6,
            projected_dim: 2,
        }
    }

    #[test]
    fn preconditioning_matches_denoiser_form() {
        for &s in &[0.002, 0.5, 3.0, 80.0] {
            let p = Preconditioning::<f64>::new(s);
            let sd2 = SIGMA_DATA * SIGMA_DATA;
            let c_skip = sd2 / (s * s + sd2);
            let c_out = s * SIGMA_DATA / (s * s + sd2).sqrt();
            // (x - (c_skip x + c_out F)) / s
            assert!((p.skip - (1.0 - c_skip) / s).abs() < 1e-12);
            assert!((p.out - c_out / s).abs() < 1e-12);
        }
    }

    #[test]
    fn default_fits_budget() {
        let d = TinyDenoiser::<f64>::seeded(&Architecture::default(), 0).unwrap();
        assert!(d.param_count() <= MAX_PARAMETERS);
        assert_eq!(d.net().input_channels(), 3 + 18 + 64 + 1);
    }

    #[test]
    fn rejects_out_of_range_architectures() {
        let mut a = Architecture::default();
        a.layers = 5;
        assert!(TinyDenoiser::<f64>::seeded(&a, 0).is_err());
        a.layers = 4;
        a.hidden_channels = 33;
        assert!(TinyDenoiser::<f64>::seeded(&a, 0).is_err());
    }

    #[test]
    fn output_shape() {
        let d = TinyDenoiser::<f64>::seeded(&small_arch(), 1).unwrap();
        let cam = Camera::centered(8.0, 8, 6);
        let cond = ConditioningBundle::ray_only(crate::geometry::plucker_ray_map(&cam));
        let x = FeatureImage::filled(6, 8, 3, 0.1);
        let eps = d.predict_noise(&x, 1.0, &cond).unwrap();
        assert_eq!(eps.shape(), (6, 8, 3));
        assert!(eps.is_finite());
    }

    #[test]
    fn checkpoint_round_trip() {
        let d = TinyDenoiser::<f32>::seeded(&small_arch(), 2).unwrap();
        let bytes = d.to_bytes();
        assert_eq!(&bytes[..4], b"TDNZ");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 4);
        let back = TinyDenoiser::<f32>::from_bytes(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_bytes(), bytes);
        assert!(TinyDenoiser::<f32>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(TinyDenoiser::<f32>::from_bytes(&bad).is_err());
    }
}
