use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Architecture description of one layer, before parameters exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    ReLU,
    MaxPool {
        window: usize,
        stride: usize,
    },
    Flatten,
    Dense {
        out_features: usize,
    },
}

/// Feature shape flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatShape {
    Spatial { channels: usize, height: usize, width: usize },
    Flat { features: usize },
}

impl FeatShape {
    pub fn element_count(&self) -> usize {
        match self {
            FeatShape::Spatial {
                channels,
                height,
                width,
            } => channels * height * width,
            FeatShape::Flat { features } => *features,
        }
    }

    pub fn tensor_shape(&self, batch: usize) -> Vec<usize> {
        match self {
            FeatShape::Spatial {
                channels,
                height,
                width,
            } => vec![batch, *channels, *height, *width],
            FeatShape::Flat { features } => vec![batch, *features],
        }
    }
}

/// A layer with its parameters. Conv weights are `[out][in][ky][kx]`,
/// dense weights `[out][in]`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    ReLU,
    MaxPool {
        window: usize,
        stride: usize,
    },
    Flatten,
    Dense {
        in_features: usize,
        out_features: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
}

/// Per-layer bookkeeping a backward pass (and the kink detector) needs.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerAux {
    None,
    /// Which activations were positive.
    ReluMask(Vec<bool>),
    /// Flat input index of each pooled maximum.
    PoolArgmax(Vec<usize>),
}

fn conv_out_extent(extent: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = extent + 2 * pad;
    if padded < kernel {
        return Err(Error::domain(format!(
            "kernel {kernel} larger than padded extent {padded}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

impl LayerSpec {
    /// Output shape of this layer given its input shape; rejects layers that
    /// do not apply (Dense before Flatten, pooling on flat features, ...).
    pub fn output_shape(&self, input: FeatShape) -> Result<FeatShape> {
        match (self, input) {
            (
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    stride,
                    pad,
                },
                FeatShape::Spatial { height, width, .. },
            ) => {
                if *kernel == 0 || *stride == 0 || *out_channels == 0 {
                    return Err(Error::domain("conv kernel/stride/channels must be >= 1"));
                }
                Ok(FeatShape::Spatial {
                    channels: *out_channels,
                    height: conv_out_extent(height, *kernel, *stride, *pad)?,
                    width: conv_out_extent(width, *kernel, *stride, *pad)?,
                })
            }
            (LayerSpec::ReLU, shape) => Ok(shape),
            (
                LayerSpec::MaxPool { window, stride },
                FeatShape::Spatial {
                    channels,
                    height,
                    width,
                },
            ) => {
                if *window == 0 || *stride == 0 {
                    return Err(Error::domain("pool window/stride must be >= 1"));
                }
                if height < *window || width < *window {
                    return Err(Error::domain("pool window larger than input"));
                }
                Ok(FeatShape::Spatial {
                    channels,
                    height: (height - window) / stride + 1,
                    width: (width - window) / stride + 1,
                })
            }
            (LayerSpec::Flatten, FeatShape::Spatial { .. }) => Ok(FeatShape::Flat {
                features: input.element_count(),
            }),
            (LayerSpec::Dense { out_features }, FeatShape::Flat { .. }) => {
                if *out_features == 0 {
                    return Err(Error::domain("dense out_features must be >= 1"));
                }
                Ok(FeatShape::Flat {
                    features: *out_features,
                })
            }
            (spec, shape) => Err(Error::domain(format!(
                "layer {spec:?} cannot follow features shaped {shape:?}"
            ))),
        }
    }
}

impl Layer {
    pub fn parameter_count(&self) -> usize {
        match self {
            Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                weight.len() + bias.len()
            }
            _ => 0,
        }
    }

    pub fn params(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                Some((weight, bias))
            }
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut Vec<f64>, &mut Vec<f64>)> {
        match self {
            Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                Some((weight, bias))
            }
            _ => None,
        }
    }

    pub fn forward(
        &self,
        input: &Tensor,
        in_shape: FeatShape,
        out_shape: FeatShape,
        batch: usize,
    ) -> (Tensor, LayerAux) {
        match self {
            Layer::Conv {
                in_channels,
                out_channels,
                kernel,
                stride,
                pad,
                weight,
                bias,
            } => {
                let (ih, iw) = spatial_hw(in_shape);
                let (oh, ow) = spatial_hw(out_shape);
                let mut out = Tensor::zeros(&out_shape.tensor_shape(batch));
                for b in 0..batch {
                    let in_base = b * in_channels * ih * iw;
                    let out_base = b * out_channels * oh * ow;
                    for oc in 0..*out_channels {
                        let o0 = out_base + oc * oh * ow;
                        out.data[o0..o0 + oh * ow].fill(bias[oc]);
                        for ic in 0..*in_channels {
                            let i0 = in_base + ic * ih * iw;
                            let w0 = (oc * in_channels + ic) * kernel * kernel;
                            for ky in 0..*kernel {
                                for kx in 0..*kernel {
                                    let w = weight[w0 + ky * kernel + kx];
                                    for oy in 0..oh {
                                        let iy = (oy * stride + ky) as isize - *pad as isize;
                                        if iy < 0 || iy >= ih as isize {
                                            continue;
                                        }
                                        let irow = i0 + iy as usize * iw;
                                        let orow = o0 + oy * ow;
                                        for ox in 0..ow {
                                            let ix =
                                                (ox * stride + kx) as isize - *pad as isize;
                                            if ix < 0 || ix >= iw as isize {
                                                continue;
                                            }
                                            out.data[orow + ox] +=
                                                w * input.data[irow + ix as usize];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                (out, LayerAux::None)
            }
            Layer::ReLU => {
                let mut out = input.clone();
                let mut mask = vec![false; out.data.len()];
                for (v, m) in out.data.iter_mut().zip(mask.iter_mut()) {
                    if *v > 0.0 {
                        *m = true;
                    } else {
                        *v = 0.0;
                    }
                }
                (out, LayerAux::ReluMask(mask))
            }
            Layer::MaxPool { window, stride } => {
                let channels = match in_shape {
                    FeatShape::Spatial { channels, .. } => channels,
                    FeatShape::Flat { .. } => unreachable!("pool on flat features"),
                };
                let (ih, iw) = spatial_hw(in_shape);
                let (oh, ow) = spatial_hw(out_shape);
                let mut out = Tensor::zeros(&out_shape.tensor_shape(batch));
                let mut argmax = vec![0usize; out.data.len()];
                for b in 0..batch {
                    for c in 0..channels {
                        let i0 = (b * channels + c) * ih * iw;
                        let o0 = (b * channels + c) * oh * ow;
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let mut best = f64::NEG_INFINITY;
                                let mut best_idx = 0usize;
                                for wy in 0..*window {
                                    for wx in 0..*window {
                                        let idx = i0
                                            + (oy * stride + wy) * iw
                                            + (ox * stride + wx);
                                        if input.data[idx] > best {
                                            best = input.data[idx];
                                            best_idx = idx;
                                        }
                                    }
                                }
                                out.data[o0 + oy * ow + ox] = best;
                                argmax[o0 + oy * ow + ox] = best_idx;
                            }
                        }
                    }
                }
                (out, LayerAux::PoolArgmax(argmax))
            }
            Layer::Flatten => {
                let mut out = input.clone();
                out.shape = out_shape.tensor_shape(batch);
                (out, LayerAux::None)
            }
            Layer::Dense {
                in_features,
                out_features,
                weight,
                bias,
            } => {
                let mut out = Tensor::zeros(&out_shape.tensor_shape(batch));
                for b in 0..batch {
                    let i0 = b * in_features;
                    let o0 = b * out_features;
                    for o in 0..*out_features {
                        let w0 = o * in_features;
                        let mut acc = bias[o];
                        for i in 0..*in_features {
                            acc += weight[w0 + i] * input.data[i0 + i];
                        }
                        out.data[o0 + o] = acc;
                    }
                }
                (out, LayerAux::None)
            }
        }
    }

    /// Gradient of the loss w.r.t. this layer's input and parameters, given
    /// the gradient w.r.t. its output.
    pub fn backward(
        &self,
        input: &Tensor,
        aux: &LayerAux,
        grad_out: &Tensor,
        in_shape: FeatShape,
        out_shape: FeatShape,
        batch: usize,
    ) -> (Tensor, Option<(Vec<f64>, Vec<f64>)>) {
        match self {
            Layer::Conv {
                in_channels,
                out_channels,
                kernel,
                stride,
                pad,
                weight,
                ..
            } => {
                let (ih, iw) = spatial_hw(in_shape);
                let (oh, ow) = spatial_hw(out_shape);
                let mut grad_in = Tensor::zeros(&in_shape.tensor_shape(batch));
                let mut dweight = vec![0.0; weight.len()];
                let mut dbias = vec![0.0; *out_channels];
                for b in 0..batch {
                    let in_base = b * in_channels * ih * iw;
                    let out_base = b * out_channels * oh * ow;
                    for oc in 0..*out_channels {
                        let o0 = out_base + oc * oh * ow;
                        for g in &grad_out.data[o0..o0 + oh * ow] {
                            dbias[oc] += g;
                        }
                        for ic in 0..*in_channels {
                            let i0 = in_base + ic * ih * iw;
                            let w0 = (oc * in_channels + ic) * kernel * kernel;
                            for ky in 0..*kernel {
                                for kx in 0..*kernel {
                                    let w = weight[w0 + ky * kernel + kx];
                                    let mut dw = 0.0;
                                    for oy in 0..oh {
                                        let iy = (oy * stride + ky) as isize - *pad as isize;
                                        if iy < 0 || iy >= ih as isize {
                                            continue;
                                        }
                                        let irow = i0 + iy as usize * iw;
                                        let orow = o0 + oy * ow;
                                        for ox in 0..ow {
                                            let ix =
                                                (ox * stride + kx) as isize - *pad as isize;
                                            if ix < 0 || ix >= iw as isize {
                                                continue;
                                            }
                                            let g = grad_out.data[orow + ox];
                                            dw += g * input.data[irow + ix as usize];
                                            grad_in.data[irow + ix as usize] += w * g;
                                        }
                                    }
                                    dweight[w0 + ky * kernel + kx] += dw;
                                }
                            }
                        }
                    }
                }
                (grad_in, Some((dweight, dbias)))
            }
            Layer::ReLU => {
                let mask = match aux {
                    LayerAux::ReluMask(m) => m,
                    _ => unreachable!("relu aux"),
                };
                let mut grad_in = grad_out.clone();
                for (g, m) in grad_in.data.iter_mut().zip(mask) {
                    if !*m {
                        *g = 0.0;
                    }
                }
                (grad_in, None)
            }
            Layer::MaxPool { .. } => {
                let argmax = match aux {
                    LayerAux::PoolArgmax(a) => a,
                    _ => unreachable!("pool aux"),
                };
                let mut grad_in = Tensor::zeros(&in_shape.tensor_shape(batch));
                for (g, idx) in grad_out.data.iter().zip(argmax) {
                    grad_in.data[*idx] += g;
                }
                (grad_in, None)
            }
            Layer::Flatten => {
                let mut grad_in = grad_out.clone();
                grad_in.shape = in_shape.tensor_shape(batch);
                (grad_in, None)
            }
            Layer::Dense {
                in_features,
                out_features,
                weight,
                ..
            } => {
                let mut grad_in = Tensor::zeros(&in_shape.tensor_shape(batch));
                let mut dweight = vec![0.0; weight.len()];
                let mut dbias = vec![0.0; *out_features];
                for b in 0..batch {
                    let i0 = b * in_features;
                    let o0 = b * out_features;
                    for o in 0..*out_features {
                        let g = grad_out.data[o0 + o];
                        dbias[o] += g;
                        let w0 = o * in_features;
                        for i in 0..*in_features {
                            dweight[w0 + i] += g * input.data[i0 + i];
                            grad_in.data[i0 + i] += g * weight[w0 + i];
                        }
                    }
                }
                (grad_in, Some((dweight, dbias)))
            }
        }
    }
}

fn spatial_hw(shape: FeatShape) -> (usize, usize) {
    match shape {
        FeatShape::Spatial { height, width, .. } => (height, width),
        FeatShape::Flat { .. } => unreachable!("expected spatial features"),
    }
}
