//! Small same-padded convolutional network with hand-written backprop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::FeatureImage;
use crate::scalar::Real;

/// One zero-padded convolution. Weights are stored `[ky][kx][in][out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<T> {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    weights: Vec<T>,
    biases: Vec<T>,
}

impl<T: Real> ConvLayer<T> {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        weights: Vec<T>,
        biases: Vec<T>,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::InvalidArgument(
                "convolution needs nonzero channel counts".into(),
            ));
        }
        if kernel % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel size must be odd, got {kernel}"
            )));
        }
        let n = kernel * kernel * in_channels * out_channels;
        if weights.len() != n {
            return Err(Error::shape(
                format!("{n} weights"),
                weights.len().to_string(),
            ));
        }
        if biases.len() != out_channels {
            return Err(Error::shape(
                format!("{out_channels} biases"),
                biases.len().to_string(),
            ));
        }
        if !weights.iter().chain(&biases).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("convolution parameters".into()));
        }
        Ok(ConvLayer {
            in_channels,
            out_channels,
            kernel,
            weights,
            biases,
        })
    }

    /// He-style normal weights with standard deviation `gain / sqrt(fan_in)`, zero biases.
    pub fn seeded(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        gain: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let fan_in = (kernel * kernel * in_channels) as f64;
        let std = gain / fan_in.sqrt();
        let n = kernel * kernel * in_channels * out_channels;
        let weights = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                T::lit(z * std)
            })
            .collect();
        Self::new(
            in_channels,
            out_channels,
            kernel,
            weights,
            vec![T::zero(); out_channels],
        )
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn biases(&self) -> &[T] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [T] {
        &mut self.biases
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn block(&self, ky: usize, kx: usize) -> usize {
        (ky * self.kernel + kx) * self.in_channels * self.out_channels
    }

    pub fn forward(&self, input: &FeatureImage<T>) -> Result<FeatureImage<T>> {
        input.ensure_channels(self.in_channels)?;
        let (h, w, _) = input.shape();
        let (ci, co) = (self.in_channels, self.out_channels);
        let r = self.kernel / 2;
        let mut out = FeatureImage::zeros(h, w, co);
        for y in 0..h {
            for x in 0..w {
                let base = out.index(y, x, 0);
                let acc = &mut out.data_mut()[base..base + co];
                acc.copy_from_slice(&self.biases);
                for ky in 0..self.kernel {
                    let Some(sy) = (y + ky).checked_sub(r).filter(|&s| s < h) else {
                        continue;
                    };
                    for kx in 0..self.kernel {
                        let Some(sx) = (x + kx).checked_sub(r).filter(|&s| s < w) else {
                            continue;
                        };
                        let block = &self.weights[self.block(ky, kx)..][..ci * co];
                        for (a, row) in input.pixel(sy, sx).iter().zip(block.chunks_exact(co)) {
                            if *a == T::zero() {
                                continue;
                            }
                            for (o, &wt) in acc.iter_mut().zip(row) {
                                *o += *a * wt;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grad` and, when requested,
    /// returns the gradient with respect to `input`.
    fn backward(
        &self,
        input: &FeatureImage<T>,
        grad_out: &FeatureImage<T>,
        grad: &mut LayerGrad<T>,
        want_input: bool,
    ) -> Option<FeatureImage<T>> {
        let (h, w, _) = input.shape();
        let (ci, co) = (self.in_channels, self.out_channels);
        let r = self.kernel / 2;
        let mut gin = want_input.then(|| FeatureImage::zeros(h, w, ci));
        for y in 0..h {
            for x in 0..w {
                let g = grad_out.pixel(y, x);
                if g.iter().all(|v| *v == T::zero()) {
                    continue;
                }
                for (b, &gv) in grad.biases.iter_mut().zip(g) {
                    *b += gv;
                }
                for ky in 0..self.kernel {
                    let Some(sy) = (y + ky).checked_sub(r).filter(|&s| s < h) else {
                        continue;
                    };
                    for kx in 0..self.kernel {
                        let Some(sx) = (x + kx).checked_sub(r).filter(|&s| s < w) else {
                            continue;
                        };
                        let off = self.block(ky, kx);
                        let block = &self.weights[off..off + ci * co];
                        let dblock = &mut grad.weights[off..off + ci * co];
                        let src = input.pixel(sy, sx);
                        for (i, (wrow, drow)) in block
                            .chunks_exact(co)
                            .zip(dblock.chunks_exact_mut(co))
                            .enumerate()
                        {
                            let a = src[i];
                            if a != T::zero() {
                                for (d, &gv) in drow.iter_mut().zip(g) {
                                    *d += a * gv;
                                }
                            }
                            if let Some(gin) = gin.as_mut() {
                                let mut s = T::zero();
                                for (&wt, &gv) in wrow.iter().zip(g) {
                                    s += wt * gv;
                                }
                                gin.pixel_mut(sy, sx)[i] += s;
                            }
                        }
                    }
                }
            }
        }
        gin
    }
}

/// Gradient buffers shaped like one [`ConvLayer`].
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad<T> {
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

/// Convolutions with ReLU between them and a linear last layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvNet<T> {
    layers: Vec<ConvLayer<T>>,
}

/// Activations kept from a forward pass: entry 0 is the input and entry `i + 1`
/// the output of layer `i` (after ReLU for hidden layers).
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    pub activations: Vec<FeatureImage<T>>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn output(&self) -> &FeatureImage<T> {
        self.activations.last().expect("trace holds the input")
    }
}

impl<T: Real> ConvNet<T> {
    pub fn new(layers: Vec<ConvLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "network needs at least one layer".into(),
            ));
        }
        for pair in layers.windows(2) {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::shape(
                    format!("{} input channels", pair[0].out_channels),
                    pair[1].in_channels.to_string(),
                ));
            }
        }
        Ok(ConvNet { layers })
    }

    /// Seeded network through the given channel widths, e.g. `[in, 16, 16, out]`.
    pub fn seeded(widths: &[usize], kernel: usize, seed: u64) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "network needs input and output widths".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let gain = if i == last {
                    1.0
                } else {
                    std::f64::consts::SQRT_2
                };
                ConvLayer::seeded(w[0], w[1], kernel, gain, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[ConvLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer<T>] {
        &mut self.layers
    }

    pub fn input_channels(&self) -> usize {
        self.layers[0].in_channels
    }

    pub fn output_channels(&self) -> usize {
        self.layers[self.layers.len() - 1].out_channels
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(ConvLayer::param_count).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    pub fn trace(&self, input: &FeatureImage<T>) -> Result<ForwardTrace<T>> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = layer.forward(&activations[i])?;
            if i < last {
                out.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = v.max(T::zero()));
            }
            activations.push(out);
        }
        Ok(ForwardTrace { activations })
    }

    pub fn forward(&self, input: &FeatureImage<T>) -> Result<FeatureImage<T>> {
        Ok(self
            .trace(input)?
            .activations
            .pop()
            .expect("nonempty trace"))
    }

    pub fn zero_grad(&self) -> Vec<LayerGrad<T>> {
        self.layers
            .iter()
            .map(|l| LayerGrad {
                weights: vec![T::zero(); l.weights.len()],
                biases: vec![T::zero(); l.biases.len()],
            })
            .collect()
    }

    /// Backpropagates `grad_out` (gradient of the loss at the network output),
    /// accumulating into `grads`, and returns the input gradient if asked for.
    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        grad_out: &FeatureImage<T>,
        grads: &mut [LayerGrad<T>],
        want_input: bool,
    ) -> Result<Option<FeatureImage<T>>> {
        grad_out.ensure_shape(trace.output())?;
        if grads.len() != self.layers.len() {
            return Err(Error::shape(
                format!("{} layer grads", self.layers.len()),
                grads.len().to_string(),
            ));
        }
        let mut g = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            let need = want_input || i > 0;
            let gin = self.layers[i].backward(&trace.activations[i], &g, &mut grads[i], need);
            if i == 0 {
                return Ok(gin);
            }
            g = gin.expect("hidden layers always propagate");
            for (gv, &a) in g.data_mut().iter_mut().zip(trace.activations[i].data()) {
                if a <= T::zero() {
                    *gv = T::zero();
                }
            }
        }
        unreachable!("loop returns at the first layer")
    }

    /// Mutable views of every parameter buffer, weights then biases per layer.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }
}

pub fn grad_slices<T>(grads: &[LayerGrad<T>]) -> Vec<&[T]> {
    grads
        .iter()
        .flat_map(|g| [g.weights.as_slice(), g.biases.as_slice()])
        .collect()
}
