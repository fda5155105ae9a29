//! Binary model format.
//!
//! Layout (all integers little-endian u32, all floats little-endian f32):
//!
//! ```text
//! magic "VPG1"
//! input_channels input_height input_width
//! layer_count
//! per layer: tag, hyperparameters
//!   1 = Conv:    in_channels out_channels kernel stride pad
//!   2 = ReLU
//!   3 = MaxPool: window stride
//!   4 = Flatten
//!   5 = Dense:   in_features out_features
//! per parametric layer, in layer order: weight tensor, bias tensor
//!   tensor = ndim, dims..., f32 data
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::layers::{FeatShape, Layer};
use super::network::Network;

const MAGIC: &[u8; 4] = b"VPG1";

pub fn save_model(net: &Network, path: &Path) -> Result<()> {
    for layer in net.layers() {
        if let Some((w, b)) = layer.params() {
            if w.iter().chain(b).any(|v| !v.is_finite()) {
                return Err(Error::domain("refusing to save non-finite parameters"));
            }
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let (c, h, w) = net.input_shape();
    for v in [c, h, w, net.layers().len()] {
        push_u32(&mut out, v);
    }
    for layer in net.layers() {
        match layer {
            Layer::Conv {
                in_channels,
                out_channels,
                kernel,
                stride,
                pad,
                ..
            } => {
                push_u32(&mut out, 1);
                for v in [in_channels, out_channels, kernel, stride, pad] {
                    push_u32(&mut out, *v);
                }
            }
            Layer::ReLU => push_u32(&mut out, 2),
            Layer::MaxPool { window, stride } => {
                push_u32(&mut out, 3);
                push_u32(&mut out, *window);
                push_u32(&mut out, *stride);
            }
            Layer::Flatten => push_u32(&mut out, 4),
            Layer::Dense {
                in_features,
                out_features,
                ..
            } => {
                push_u32(&mut out, 5);
                push_u32(&mut out, *in_features);
                push_u32(&mut out, *out_features);
            }
        }
    }
    for layer in net.layers() {
        match layer {
            Layer::Conv {
                in_channels,
                out_channels,
                kernel,
                weight,
                bias,
                ..
            } => {
                push_tensor(&mut out, &[*out_channels, *in_channels, *kernel, *kernel], weight);
                push_tensor(&mut out, &[*out_channels], bias);
            }
            Layer::Dense {
                in_features,
                out_features,
                weight,
                bias,
            } => {
                push_tensor(&mut out, &[*out_features, *in_features], weight);
                push_tensor(&mut out, &[*out_features], bias);
            }
            _ => {}
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Network> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_model(&bytes)
}

pub fn parse_model(bytes: &[u8]) -> Result<Network> {
    if bytes.len() < 4 || &bytes[0..4] != MAGIC {
        return Err(Error::parse("bad magic, expected VPG1", 0));
    }
    let mut pos = 4usize;
    let c = read_u32(bytes, &mut pos)? as usize;
    let h = read_u32(bytes, &mut pos)? as usize;
    let w = read_u32(bytes, &mut pos)? as usize;
    let layer_count = read_u32(bytes, &mut pos)? as usize;
    if layer_count > 1024 {
        return Err(Error::parse("implausible layer count", pos - 4));
    }
    // hyperparameter table first, parameters after
    enum Proto {
        Conv(usize, usize, usize, usize, usize),
        ReLU,
        MaxPool(usize, usize),
        Flatten,
        Dense(usize, usize),
    }
    let mut protos = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let tag = read_u32(bytes, &mut pos)?;
        protos.push(match tag {
            1 => {
                let mut v = [0usize; 5];
                for slot in &mut v {
                    *slot = read_u32(bytes, &mut pos)? as usize;
                }
                Proto::Conv(v[0], v[1], v[2], v[3], v[4])
            }
            2 => Proto::ReLU,
            3 => {
                let window = read_u32(bytes, &mut pos)? as usize;
                let stride = read_u32(bytes, &mut pos)? as usize;
                Proto::MaxPool(window, stride)
            }
            4 => Proto::Flatten,
            5 => {
                let inf = read_u32(bytes, &mut pos)? as usize;
                let outf = read_u32(bytes, &mut pos)? as usize;
                Proto::Dense(inf, outf)
            }
            other => return Err(Error::parse(format!("unknown layer tag {other}"), pos - 4)),
        });
    }
    let mut layers = Vec::with_capacity(layer_count);
    for proto in protos {
        layers.push(match proto {
            Proto::Conv(in_ch, out_ch, kernel, stride, pad) => {
                let weight =
                    read_tensor(bytes, &mut pos, &[out_ch, in_ch, kernel, kernel])?;
                let bias = read_tensor(bytes, &mut pos, &[out_ch])?;
                Layer::Conv {
                    in_channels: in_ch,
                    out_channels: out_ch,
                    kernel,
                    stride,
                    pad,
                    weight,
                    bias,
                }
            }
            Proto::ReLU => Layer::ReLU,
            Proto::MaxPool(window, stride) => Layer::MaxPool { window, stride },
            Proto::Flatten => Layer::Flatten,
            Proto::Dense(in_features, out_features) => {
                let weight = read_tensor(bytes, &mut pos, &[out_features, in_features])?;
                let bias = read_tensor(bytes, &mut pos, &[out_features])?;
                Layer::Dense {
                    in_features,
                    out_features,
                    weight,
                    bias,
                }
            }
        });
    }
    if pos != bytes.len() {
        return Err(Error::parse("trailing bytes after model", pos));
    }
    Network::from_parts(
        layers,
        FeatShape::Spatial {
            channels: c,
            height: h,
            width: w,
        },
    )
    .map_err(|e| Error::parse(format!("inconsistent model: {e}"), pos))
}

fn push_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn push_tensor(out: &mut Vec<u8>, dims: &[usize], data: &[f64]) {
    push_u32(out, dims.len());
    for d in dims {
        push_u32(out, *d);
    }
    for v in data {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

fn read_u32(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    let end = *pos + 4;
    if end > bytes.len() {
        return Err(Error::parse("truncated model file", *pos));
    }
    let v = u32::from_le_bytes(bytes[*pos..end].try_into().unwrap());
    *pos = end;
    Ok(v)
}

fn read_tensor(bytes: &[u8], pos: &mut usize, expected_dims: &[usize]) -> Result<Vec<f64>> {
    let start = *pos;
    let ndim = read_u32(bytes, pos)? as usize;
    if ndim != expected_dims.len() {
        return Err(Error::parse(
            format!("tensor rank {ndim}, expected {}", expected_dims.len()),
            start,
        ));
    }
    let mut count = 1usize;
    for expected in expected_dims {
        let d = read_u32(bytes, pos)? as usize;
        if d != *expected {
            return Err(Error::parse(
                format!("tensor dim {d}, expected {expected}"),
                *pos - 4,
            ));
        }
        count *= d;
    }
    let end = *pos + 4 * count;
    if end > bytes.len() {
        return Err(Error::parse("truncated tensor data", *pos));
    }
    let data = bytes[*pos..end]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    *pos = end;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, Tensor};

    fn reference_net() -> Network {
        Network::build(
            1,
            16,
            16,
            &[
                LayerSpec::Conv {
                    out_channels: 4,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                },
                LayerSpec::ReLU,
                LayerSpec::MaxPool { window: 2, stride: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { out_features: 10 },
            ],
            77,
        )
        .unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let net = reference_net();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bin");
        let b = dir.path().join("b.bin");
        save_model(&net, &a).unwrap();
        let loaded = load_model(&a).unwrap();
        save_model(&loaded, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn loaded_net_forward_matches_f32_cast_original() {
        let mut net = reference_net();
        // quantize parameters to f32 so forward passes agree exactly
        for layer in net.layers_mut() {
            if let Some((w, b)) = layer.params_mut() {
                for v in w.iter_mut().chain(b.iter_mut()) {
                    *v = f64::from(*v as f32);
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&net, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        let batch = Tensor::from_data(
            &[1, 1, 16, 16],
            (0..256).map(|i| i as f64 / 256.0).collect(),
        )
        .unwrap();
        assert_eq!(
            net.forward(&batch).unwrap(),
            loaded.forward(&batch).unwrap()
        );
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(matches!(parse_model(b"XXXX"), Err(Error::Parse { .. })));
        let net = reference_net();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&net, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        match parse_model(&bytes[..bytes.len() - 3]) {
            Err(Error::Parse { offset, .. }) => assert!(offset > 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
