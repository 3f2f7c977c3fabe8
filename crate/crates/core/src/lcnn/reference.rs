//! Scalar-loop convolutions over an explicitly zero-padded copy of the
//! input. Slow on purpose; every multiply is counted so the analyzer's
//! MAC figures can be checked against what actually executes.

use super::conv::{ConvKernel, ConvKind};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Output of a counted reference run.
#[derive(Debug, Clone)]
pub struct Counted {
    pub output: Tensor,
    pub multiplies: u64,
}

fn padded(input: &Tensor, pad: usize) -> Tensor {
    let (c, h, w) = input.shape();
    let mut out = Tensor::zeros(c, h + 2 * pad, w + 2 * pad);
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                out.set(ch, y + pad, x + pad, input.get(ch, y, x));
            }
        }
    }
    out
}

fn prepare(input: &Tensor, k: &ConvKernel, kind: ConvKind) -> Result<(Tensor, usize, usize)> {
    if k.kind != kind {
        return Err(Error::shape(format!("expected a {kind:?} kernel, got {:?}", k.kind)));
    }
    if input.channels() != k.in_channels {
        return Err(Error::shape("input channels do not match kernel"));
    }
    let oh = k.output_side(input.height()).ok_or_else(|| Error::shape("kernel larger than padded input"))?;
    let ow = k.output_side(input.width()).ok_or_else(|| Error::shape("kernel larger than padded input"))?;
    Ok((padded(input, k.padding), oh, ow))
}

fn bias_of(k: &ConvKernel, n: usize) -> f64 {
    k.bias.as_ref().map_or(0.0, |b| b[n])
}

pub fn conv2d_counted(input: &Tensor, k: &ConvKernel) -> Result<Counted> {
    let (f, oh, ow) = prepare(input, k, ConvKind::Conventional)?;
    let d = k.size;
    let mut out = Tensor::zeros(k.out_channels, oh, ow);
    let mut multiplies = 0u64;
    for n in 0..k.out_channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = bias_of(k, n);
                for m in 0..k.in_channels {
                    for i in 0..d {
                        for j in 0..d {
                            let w = k.weights[((n * k.in_channels + m) * d + i) * d + j];
                            acc += w * f.get(m, y * k.stride + i, x * k.stride + j);
                            multiplies += 1;
                        }
                    }
                }
                out.set(n, y, x, acc);
            }
        }
    }
    Ok(Counted { output: out, multiplies })
}

pub fn depthwise_counted(input: &Tensor, k: &ConvKernel) -> Result<Counted> {
    let (f, oh, ow) = prepare(input, k, ConvKind::Depthwise)?;
    let d = k.size;
    let mut out = Tensor::zeros(k.out_channels, oh, ow);
    let mut multiplies = 0u64;
    for m in 0..k.in_channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = bias_of(k, m);
                for i in 0..d {
                    for j in 0..d {
                        acc += k.weights[(m * d + i) * d + j] * f.get(m, y * k.stride + i, x * k.stride + j);
                        multiplies += 1;
                    }
                }
                out.set(m, y, x, acc);
            }
        }
    }
    Ok(Counted { output: out, multiplies })
}

pub fn pointwise_counted(input: &Tensor, k: &ConvKernel) -> Result<Counted> {
    let (f, oh, ow) = prepare(input, k, ConvKind::Pointwise)?;
    let mut out = Tensor::zeros(k.out_channels, oh, ow);
    let mut multiplies = 0u64;
    for n in 0..k.out_channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = bias_of(k, n);
                for m in 0..k.in_channels {
                    acc += k.weights[n * k.in_channels + m] * f.get(m, y, x);
                    multiplies += 1;
                }
                out.set(n, y, x, acc);
            }
        }
    }
    Ok(Counted { output: out, multiplies })
}

/// Depthwise followed by pointwise; the count covers both stages.
pub fn separable_counted(input: &Tensor, depthwise: &ConvKernel, pointwise: &ConvKernel) -> Result<Counted> {
    let a = depthwise_counted(input, depthwise)?;
    let b = pointwise_counted(&a.output, pointwise)?;
    Ok(Counted { output: b.output, multiplies: a.multiplies + b.multiplies })
}

pub fn conv_counted(input: &Tensor, k: &ConvKernel) -> Result<Counted> {
    match k.kind {
        ConvKind::Conventional => conv2d_counted(input, k),
        ConvKind::Depthwise => depthwise_counted(input, k),
        ConvKind::Pointwise => pointwise_counted(input, k),
    }
}
