//! Binary model files.
//!
//! Layout (little-endian): `LCNN`, u32 version, u32 record count, then per
//! record a u32 tag, u32 shape length, u32 shape values, u32 weight count
//! and f32 weights; a CRC32 of everything before it closes the file.

use std::path::{Path, PathBuf};

use super::conv::{ConvKernel, ConvKind};
use super::layers::BatchNorm;
use super::model::{CnnModel, Layer};
use super::ssd::PriorConfig;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LCNN";
pub const VERSION: u32 = 1;

const TAG_INPUT: u32 = 0;
const TAG_CONV: u32 = 1;
const TAG_DEPTHWISE: u32 = 2;
const TAG_POINTWISE: u32 = 3;
const TAG_BATCHNORM: u32 = 4;
const TAG_RELU: u32 = 5;
const TAG_SOFTMAX_HEAD: u32 = 6;
const TAG_BBOX_REGRESSOR: u32 = 7;
const TAG_PRIORS: u32 = 8;

struct Writer {
    buf: Vec<u8>,
    records: u32,
}

impl Writer {
    fn record(&mut self, tag: u32, shape: &[usize], weights: &[&[f64]]) {
        self.records += 1;
        self.buf.extend_from_slice(&tag.to_le_bytes());
        self.buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for s in shape {
            self.buf.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        let count: usize = weights.iter().map(|w| w.len()).sum();
        self.buf.extend_from_slice(&(count as u32).to_le_bytes());
        for w in weights.iter().flat_map(|w| w.iter()) {
            self.buf.extend_from_slice(&(*w as f32).to_le_bytes());
        }
    }
}

fn kernel_parts(k: &ConvKernel) -> Vec<&[f64]> {
    let mut parts: Vec<&[f64]> = vec![&k.weights];
    if let Some(b) = &k.bias {
        parts.push(b);
    }
    parts
}

/// Serializes the model. Values are written as `f32`.
pub fn model_to_bytes(model: &CnnModel) -> Vec<u8> {
    let mut w = Writer { buf: Vec::new(), records: 0 };
    let [c, h, wd] = model.input_shape();
    w.record(TAG_INPUT, &[c, h, wd], &[]);
    for layer in model.layers() {
        match layer {
            Layer::Conv(k) => {
                let has_bias = usize::from(k.bias.is_some());
                let (tag, shape) = match k.kind {
                    ConvKind::Conventional => {
                        (TAG_CONV, vec![k.in_channels, k.out_channels, k.size, k.stride, k.padding, has_bias])
                    }
                    ConvKind::Depthwise => (TAG_DEPTHWISE, vec![k.in_channels, k.size, k.stride, k.padding, has_bias]),
                    ConvKind::Pointwise => (TAG_POINTWISE, vec![k.in_channels, k.out_channels, has_bias]),
                };
                w.record(tag, &shape, &kernel_parts(k));
            }
            Layer::BatchNorm(bn) => {
                w.record(TAG_BATCHNORM, &[bn.channels()], &[&bn.gamma, &bn.beta, &bn.mean, &bn.var]);
            }
            Layer::Relu => w.record(TAG_RELU, &[], &[]),
            Layer::SoftmaxHead { source, classes, kernel } => w.record(
                TAG_SOFTMAX_HEAD,
                &[*source, kernel.in_channels, kernel.out_channels / classes, *classes, kernel.size, kernel.padding],
                &kernel_parts(kernel),
            ),
            Layer::BboxRegressor { source, kernel } => w.record(
                TAG_BBOX_REGRESSOR,
                &[*source, kernel.in_channels, kernel.out_channels / 4, kernel.size, kernel.padding],
                &kernel_parts(kernel),
            ),
        }
    }
    let p = &model.architecture().priors;
    let tail = [p.min_scale, p.max_scale, p.variances[0], p.variances[1]];
    w.record(TAG_PRIORS, &[p.aspect_ratios.len()], &[&p.aspect_ratios, &tail]);

    let mut out = Vec::with_capacity(w.buf.len() + 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&w.records.to_le_bytes());
    out.extend_from_slice(&w.buf);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u32(&mut self) -> Result<u32> {
        let b = self.bytes.get(self.pos..self.pos + 4).ok_or_else(|| Error::format("model file truncated"))?;
        self.pos += 4;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn record(&mut self) -> Result<(u32, Vec<usize>, Vec<f64>)> {
        let tag = self.u32()?;
        let n = self.u32()? as usize;
        if n > 16 {
            return Err(Error::format(format!("record shape of {n} values is implausible")));
        }
        let shape = (0..n).map(|_| self.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let count = self.u32()? as usize;
        let end = count
            .checked_mul(4)
            .and_then(|b| b.checked_add(self.pos))
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| Error::format("model file truncated"))?;
        let weights = self.bytes[self.pos..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        self.pos = end;
        Ok((tag, shape, weights))
    }
}

fn expect_shape(tag: u32, shape: &[usize], len: usize) -> Result<()> {
    if shape.len() != len {
        return Err(Error::format(format!("record tag {tag} needs {len} shape values, got {}", shape.len())));
    }
    Ok(())
}

fn split_bias(tag: u32, mut weights: Vec<f64>, expected: usize, bias: usize) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    if weights.len() != expected + bias {
        return Err(Error::format(format!("record tag {tag} holds {} values, expected {}", weights.len(), expected + bias)));
    }
    let b = weights.split_off(expected);
    Ok((weights, (bias > 0).then_some(b)))
}

fn as_format(e: Error) -> Error {
    match e {
        Error::Format(_) => e,
        other => Error::format(format!("invalid model: {other}")),
    }
}

/// Parses a model file image, checking magic, version and checksum.
pub fn model_from_bytes(bytes: &[u8]) -> Result<CnnModel> {
    if bytes.len() < 16 {
        return Err(Error::format("model file truncated"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format("not an LCNN model file"));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::format(format!("unsupported model version {version}")));
    }
    let stored = u32::from_le_bytes(crc_bytes.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(Error::format("model checksum mismatch"));
    }
    let mut r = Reader { bytes: body, pos: 8 };
    let records = r.u32()?;
    let mut input = None;
    let mut priors = None;
    let mut layers = Vec::new();
    for _ in 0..records {
        let (tag, s, w) = r.record()?;
        let with_bias = |flag: usize| -> Result<usize> {
            match flag {
                0 | 1 => Ok(flag),
                _ => Err(Error::format("bias flag must be 0 or 1")),
            }
        };
        match tag {
            TAG_INPUT => {
                expect_shape(tag, &s, 3)?;
                input = Some([s[0], s[1], s[2]]);
            }
            TAG_CONV => {
                expect_shape(tag, &s, 6)?;
                let out = s[1];
                let (weights, bias) = split_bias(tag, w, s[0] * out * s[2] * s[2], with_bias(s[5])? * out)?;
                let mut k = ConvKernel::conventional(out, s[0], s[2], s[3], s[4], weights).map_err(as_format)?;
                k.bias = bias;
                layers.push(Layer::Conv(k));
            }
            TAG_DEPTHWISE => {
                expect_shape(tag, &s, 5)?;
                let (weights, bias) = split_bias(tag, w, s[0] * s[1] * s[1], with_bias(s[4])? * s[0])?;
                let mut k = ConvKernel::depthwise(s[0], s[1], s[2], s[3], weights).map_err(as_format)?;
                k.bias = bias;
                layers.push(Layer::Conv(k));
            }
            TAG_POINTWISE => {
                expect_shape(tag, &s, 3)?;
                let (weights, bias) = split_bias(tag, w, s[0] * s[1], with_bias(s[2])? * s[1])?;
                let mut k = ConvKernel::pointwise(s[1], s[0], weights).map_err(as_format)?;
                k.bias = bias;
                layers.push(Layer::Conv(k));
            }
            TAG_BATCHNORM => {
                expect_shape(tag, &s, 1)?;
                let c = s[0];
                if w.len() != 4 * c {
                    return Err(Error::format("batch-norm record has the wrong value count"));
                }
                let bn = BatchNorm::new(w[..c].to_vec(), w[c..2 * c].to_vec(), w[2 * c..3 * c].to_vec(), w[3 * c..].to_vec())
                    .map_err(as_format)?;
                layers.push(Layer::BatchNorm(bn));
            }
            TAG_RELU => {
                expect_shape(tag, &s, 0)?;
                layers.push(Layer::Relu);
            }
            TAG_SOFTMAX_HEAD => {
                expect_shape(tag, &s, 6)?;
                let out = s[2] * s[3];
                let (weights, bias) = split_bias(tag, w, out * s[1] * s[4] * s[4], out)?;
                let kernel = ConvKernel::conventional(out, s[1], s[4], 1, s[5], weights)
                    .and_then(|k| k.with_bias(bias.expect("bias present")))
                    .map_err(as_format)?;
                layers.push(Layer::SoftmaxHead { source: s[0], classes: s[3], kernel });
            }
            TAG_BBOX_REGRESSOR => {
                expect_shape(tag, &s, 5)?;
                let out = s[2] * 4;
                let (weights, bias) = split_bias(tag, w, out * s[1] * s[3] * s[3], out)?;
                let kernel = ConvKernel::conventional(out, s[1], s[3], 1, s[4], weights)
                    .and_then(|k| k.with_bias(bias.expect("bias present")))
                    .map_err(as_format)?;
                layers.push(Layer::BboxRegressor { source: s[0], kernel });
            }
            TAG_PRIORS => {
                expect_shape(tag, &s, 1)?;
                if w.len() != s[0] + 4 {
                    return Err(Error::format("prior record has the wrong value count"));
                }
                let n = s[0];
                priors = Some(PriorConfig {
                    aspect_ratios: w[..n].to_vec(),
                    min_scale: w[n],
                    max_scale: w[n + 1],
                    variances: [w[n + 2], w[n + 3]],
                });
            }
            other => return Err(Error::format(format!("unknown record tag {other}"))),
        }
    }
    if r.pos != body.len() {
        return Err(Error::format("trailing bytes after the last record"));
    }
    let input = input.ok_or_else(|| Error::format("model file has no input record"))?;
    let priors = priors.ok_or_else(|| Error::format("model file has no prior record"))?;
    CnnModel::from_layers(input, layers, priors).map_err(as_format)
}

/// Where the human-readable architecture copy of `path` is written.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the binary model and its JSON architecture sidecar.
pub fn save_model(model: &CnnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(model))?;
    std::fs::write(sidecar_path(path), model.architecture().to_json())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CnnModel> {
    model_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lcnn::arch::LcnnConfig;
    use crate::lcnn::model::build_lcnn;

    fn small() -> CnnModel {
        build_lcnn(&LcnnConfig { width_multiplier: 0.125, input_size: 32 }, 7).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = small();
        let back = model_from_bytes(&model_to_bytes(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncation_and_corruption_rejected() {
        let bytes = model_to_bytes(&small());
        assert!(matches!(model_from_bytes(&bytes[..bytes.len() / 2]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        let mid = bad.len() / 2;
        bad[mid] ^= 0x40;
        assert!(matches!(model_from_bytes(&bad), Err(Error::Format(_))));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(model_from_bytes(&magic), Err(Error::Format(_))));
        let mut version = bytes;
        version[4] = 9;
        assert!(matches!(model_from_bytes(&version), Err(Error::Format(_))));
    }
}
