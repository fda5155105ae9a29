use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::raster::ImageRaster;

use super::layers::{FeatShape, Layer, LayerAux, LayerSpec};
use super::tensor::Tensor;

/// Ordered layer stack ending in a `head_classes`-way linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    /// Input shape and the output shape of every layer, `shapes[i]` being
    /// the input shape of layer `i`.
    shapes: Vec<FeatShape>,
    input: FeatShape,
}

/// Per-layer (weight, bias) gradients; `None` for parameterless layers.
pub type Gradients = Vec<Option<(Vec<f64>, Vec<f64>)>>;

/// Forward-pass cache consumed by [`Network::backward_from`].
pub struct ForwardCache {
    /// Input to each layer, plus the final logits at the end.
    activations: Vec<Tensor>,
    aux: Vec<LayerAux>,
    batch: usize,
}

impl ForwardCache {
    pub fn logits(&self) -> &Tensor {
        self.activations.last().expect("non-empty cache")
    }

    /// Signature of all ReLU masks and pool argmax choices; two perturbed
    /// forwards with different signatures straddle a kink.
    pub fn kink_signature(&self) -> Vec<u64> {
        let mut sig = Vec::new();
        for aux in &self.aux {
            match aux {
                LayerAux::ReluMask(mask) => {
                    let mut word = 0u64;
                    let mut bits = 0;
                    for m in mask {
                        word = (word << 1) | u64::from(*m);
                        bits += 1;
                        if bits == 64 {
                            sig.push(word);
                            word = 0;
                            bits = 0;
                        }
                    }
                    sig.push(word);
                }
                LayerAux::PoolArgmax(arg) => sig.extend(arg.iter().map(|a| *a as u64)),
                LayerAux::None => {}
            }
        }
        sig
    }
}

impl Network {
    /// Builds a network from layer specs, validating the shape arithmetic and
    /// initializing weights He-style (`std = sqrt(2 / fan_in)`) from `seed`.
    pub fn build(
        input_channels: usize,
        input_height: usize,
        input_width: usize,
        specs: &[LayerSpec],
        seed: u64,
    ) -> Result<Network> {
        if specs.is_empty() {
            return Err(Error::domain("network needs at least one layer"));
        }
        let input = FeatShape::Spatial {
            channels: input_channels,
            height: input_height,
            width: input_width,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shapes = vec![input];
        let mut layers = Vec::new();
        let mut shape = input;
        for (i, spec) in specs.iter().enumerate() {
            let out = spec.output_shape(shape).map_err(|e| {
                Error::domain(format!("layer {i}: {e}"))
            })?;
            // The head layer starts small so fresh logits sit near zero and
            // the initial loss lands at ln(head_classes).
            let init_scale = if i + 1 == specs.len() { 0.1 } else { 1.0 };
            layers.push(instantiate(spec, shape, init_scale, &mut rng));
            shapes.push(out);
            shape = out;
        }
        match shape {
            FeatShape::Flat { .. } => {}
            FeatShape::Spatial { .. } => {
                return Err(Error::domain("network must end in a Dense head"))
            }
        }
        match layers.last() {
            Some(Layer::Dense { .. }) => {}
            _ => return Err(Error::domain("network must end in a Dense head")),
        }
        Ok(Network {
            layers,
            shapes,
            input,
        })
    }

    pub(super) fn from_parts(layers: Vec<Layer>, input: FeatShape) -> Result<Network> {
        let mut shapes = vec![input];
        let mut shape = input;
        for layer in &layers {
            let spec = spec_of(layer);
            shape = spec.output_shape(shape)?;
            shapes.push(shape);
        }
        Ok(Network {
            layers,
            shapes,
            input,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        match self.input {
            FeatShape::Spatial {
                channels,
                height,
                width,
            } => (channels, height, width),
            FeatShape::Flat { .. } => unreachable!("input is spatial"),
        }
    }

    pub fn head_classes(&self) -> usize {
        match self.shapes.last().expect("non-empty") {
            FeatShape::Flat { features } => *features,
            FeatShape::Spatial { .. } => unreachable!("head is flat"),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    /// Logits for a `[B, C, H, W]` batch.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(self.forward_full(batch)?.logits().clone())
    }

    pub fn forward_full(&self, batch: &Tensor) -> Result<ForwardCache> {
        let b = self.check_batch(batch)?;
        let mut activations = vec![batch.clone()];
        let mut aux = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let (out, a) = layer.forward(
                activations.last().unwrap(),
                self.shapes[i],
                self.shapes[i + 1],
                b,
            );
            out.assert_finite("forward layer");
            activations.push(out);
            aux.push(a);
        }
        Ok(ForwardCache {
            activations,
            aux,
            batch: b,
        })
    }

    /// Reverse-mode gradients of every parameter given `d loss / d logits`.
    pub fn backward_from(&self, cache: &ForwardCache, dlogits: &Tensor) -> Gradients {
        let mut grads: Gradients = vec![None; self.layers.len()];
        let mut grad = dlogits.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (grad_in, param_grads) = layer.backward(
                &cache.activations[i],
                &cache.aux[i],
                &grad,
                self.shapes[i],
                self.shapes[i + 1],
                cache.batch,
            );
            grads[i] = param_grads;
            grad = grad_in;
        }
        grads
    }

    /// Gradients of the mean cross-entropy loss over a labeled batch.
    pub fn backward(&self, batch: &Tensor, labels: &[usize]) -> Result<(f64, Gradients)> {
        let cache = self.forward_full(batch)?;
        let (loss, dlogits) = softmax_cross_entropy(cache.logits(), labels)?;
        Ok((loss, self.backward_from(&cache, &dlogits)))
    }

    /// One SGD-with-momentum step: `v = momentum * v - lr * g; w += v`.
    pub fn sgd_step(&mut self, grads: &Gradients, velocity: &mut Gradients, lr: f64, momentum: f64) {
        for (layer, (g, v)) in self
            .layers
            .iter_mut()
            .zip(grads.iter().zip(velocity.iter_mut()))
        {
            let (Some((gw, gb)), Some((vw, vb))) = (g, v) else {
                continue;
            };
            let (w, b) = layer.params_mut().expect("parametric layer");
            for i in 0..w.len() {
                vw[i] = momentum * vw[i] - lr * gw[i];
                w[i] += vw[i];
            }
            for i in 0..b.len() {
                vb[i] = momentum * vb[i] - lr * gb[i];
                b[i] += vb[i];
            }
        }
    }

    pub fn zero_gradients(&self) -> Gradients {
        self.layers
            .iter()
            .map(|l| {
                l.params()
                    .map(|(w, b)| (vec![0.0; w.len()], vec![0.0; b.len()]))
            })
            .collect()
    }

    /// Converts an image into a `[1, 1, H, W]` input batch.
    pub fn image_to_batch(&self, img: &ImageRaster) -> Result<Tensor> {
        let (c, h, w) = self.input_shape();
        if c != 1 || img.height() as usize != h || img.width() as usize != w {
            return Err(Error::domain(format!(
                "image {}x{} does not match network input {c}x{h}x{w}",
                img.width(),
                img.height()
            )));
        }
        Tensor::from_data(&[1, 1, h, w], img.pixels().to_vec())
    }

    fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        let (c, h, w) = self.input_shape();
        match batch.shape.as_slice() {
            [b, bc, bh, bw] if *bc == c && *bh == h && *bw == w => Ok(*b),
            other => Err(Error::domain(format!(
                "batch shaped {other:?} does not match network input [B, {c}, {h}, {w}]"
            ))),
        }
    }
}

/// Reference desk-scale architecture: three conv/pool stages then a small
/// classifier, ending in a `head_classes`-way softmax head. Works for any
/// input divisible by 8.
pub fn reference_architecture(head_classes: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv {
            out_channels: 8,
            kernel: 3,
            stride: 1,
            pad: 1,
        },
        LayerSpec::ReLU,
        LayerSpec::MaxPool { window: 2, stride: 2 },
        LayerSpec::Conv {
            out_channels: 16,
            kernel: 3,
            stride: 1,
            pad: 1,
        },
        LayerSpec::ReLU,
        LayerSpec::MaxPool { window: 2, stride: 2 },
        LayerSpec::Conv {
            out_channels: 32,
            kernel: 3,
            stride: 1,
            pad: 1,
        },
        LayerSpec::ReLU,
        LayerSpec::MaxPool { window: 2, stride: 2 },
        LayerSpec::Flatten,
        LayerSpec::Dense { out_features: 128 },
        LayerSpec::ReLU,
        LayerSpec::Dense {
            out_features: head_classes,
        },
    ]
}

pub(super) fn spec_of(layer: &Layer) -> LayerSpec {
    match layer {
        Layer::Conv {
            out_channels,
            kernel,
            stride,
            pad,
            ..
        } => LayerSpec::Conv {
            out_channels: *out_channels,
            kernel: *kernel,
            stride: *stride,
            pad: *pad,
        },
        Layer::ReLU => LayerSpec::ReLU,
        Layer::MaxPool { window, stride } => LayerSpec::MaxPool {
            window: *window,
            stride: *stride,
        },
        Layer::Flatten => LayerSpec::Flatten,
        Layer::Dense { out_features, .. } => LayerSpec::Dense {
            out_features: *out_features,
        },
    }
}

fn instantiate(spec: &LayerSpec, input: FeatShape, init_scale: f64, rng: &mut ChaCha8Rng) -> Layer {
    match spec {
        LayerSpec::Conv {
            out_channels,
            kernel,
            stride,
            pad,
        } => {
            let in_channels = match input {
                FeatShape::Spatial { channels, .. } => channels,
                FeatShape::Flat { .. } => unreachable!("checked by output_shape"),
            };
            let fan_in = in_channels * kernel * kernel;
            Layer::Conv {
                in_channels,
                out_channels: *out_channels,
                kernel: *kernel,
                stride: *stride,
                pad: *pad,
                weight: he_init(out_channels * fan_in, fan_in, init_scale, rng),
                bias: vec![0.0; *out_channels],
            }
        }
        LayerSpec::ReLU => Layer::ReLU,
        LayerSpec::MaxPool { window, stride } => Layer::MaxPool {
            window: *window,
            stride: *stride,
        },
        LayerSpec::Flatten => Layer::Flatten,
        LayerSpec::Dense { out_features } => {
            let in_features = input.element_count();
            Layer::Dense {
                in_features,
                out_features: *out_features,
                weight: he_init(out_features * in_features, in_features, init_scale, rng),
                bias: vec![0.0; *out_features],
            }
        }
    }
}

fn he_init(count: usize, fan_in: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, scale * (2.0 / fan_in as f64).sqrt()).unwrap();
    (0..count).map(|_| normal.sample(rng)).collect()
}

/// Row-wise softmax of a `[B, K]` tensor, max-subtraction stabilized.
pub fn softmax(logits: &Tensor) -> Tensor {
    let k = *logits.shape.last().expect("non-empty shape");
    let mut out = logits.clone();
    for row in out.data.chunks_mut(k) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean negative log-likelihood over the batch and its logit gradient
/// `(softmax - onehot) / B`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (b, k) = match logits.shape.as_slice() {
        [b, k] => (*b, *k),
        other => {
            return Err(Error::domain(format!(
                "expected [B, K] logits, got shape {other:?}"
            )))
        }
    };
    if labels.len() != b {
        return Err(Error::domain("label count does not match batch size"));
    }
    if let Some(bad) = labels.iter().find(|l| **l >= k) {
        return Err(Error::domain(format!("label {bad} out of range for K = {k}")));
    }
    let mut dlogits = softmax(logits);
    let mut loss = 0.0;
    for (row, label) in dlogits.data.chunks_mut(k).zip(labels) {
        loss -= row[*label].max(f64::MIN_POSITIVE).ln();
        row[*label] -= 1.0;
        for v in row.iter_mut() {
            *v /= b as f64;
        }
    }
    Ok((loss / b as f64, dlogits))
}
