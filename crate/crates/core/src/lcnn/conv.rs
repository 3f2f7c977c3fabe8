use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvKind {
    Conventional,
    Depthwise,
    Pointwise,
}

/// Convolution filter bank.
///
/// Weight layout: conventional `[out][in][ky][kx]`, depthwise
/// `[channel][ky][kx]`, pointwise `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    pub kind: ConvKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub size: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl ConvKernel {
    fn checked(self) -> Result<Self> {
        let expect = match self.kind {
            ConvKind::Conventional => self.out_channels * self.in_channels * self.size * self.size,
            ConvKind::Depthwise => self.in_channels * self.size * self.size,
            ConvKind::Pointwise => self.out_channels * self.in_channels,
        };
        if self.size == 0 || self.stride == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::shape("kernel dimensions and stride must be positive"));
        }
        if self.kind == ConvKind::Depthwise && self.in_channels != self.out_channels {
            return Err(Error::shape("depthwise kernels preserve the channel count"));
        }
        if self.kind == ConvKind::Pointwise && (self.size != 1 || self.stride != 1 || self.padding != 0) {
            return Err(Error::shape("pointwise kernels are 1x1, stride 1, unpadded"));
        }
        if self.weights.len() != expect {
            return Err(Error::shape(format!("{:?} kernel needs {expect} weights, got {}", self.kind, self.weights.len())));
        }
        if let Some(b) = &self.bias {
            if b.len() != self.out_channels {
                return Err(Error::shape("bias length must equal output channels"));
            }
        }
        Ok(self)
    }

    pub fn conventional(
        out_channels: usize,
        in_channels: usize,
        size: usize,
        stride: usize,
        padding: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        Self { kind: ConvKind::Conventional, in_channels, out_channels, size, stride, padding, weights, bias: None }
            .checked()
    }

    pub fn depthwise(channels: usize, size: usize, stride: usize, padding: usize, weights: Vec<f64>) -> Result<Self> {
        Self {
            kind: ConvKind::Depthwise,
            in_channels: channels,
            out_channels: channels,
            size,
            stride,
            padding,
            weights,
            bias: None,
        }
        .checked()
    }

    pub fn pointwise(out_channels: usize, in_channels: usize, weights: Vec<f64>) -> Result<Self> {
        Self { kind: ConvKind::Pointwise, in_channels, out_channels, size: 1, stride: 1, padding: 0, weights, bias: None }
            .checked()
    }

    pub fn with_bias(mut self, bias: Vec<f64>) -> Result<Self> {
        self.bias = Some(bias);
        self.checked()
    }

    /// `floor((side + 2p − k) / stride) + 1`, or `None` if the kernel does
    /// not fit.
    pub fn output_side(&self, side: usize) -> Option<usize> {
        let padded = side + 2 * self.padding;
        (padded >= self.size).then(|| (padded - self.size) / self.stride + 1)
    }

    fn output_shape(&self, input: &Tensor) -> Result<(usize, usize)> {
        if input.channels() != self.in_channels {
            return Err(Error::shape(format!(
                "kernel expects {} input channels, tensor has {}",
                self.in_channels,
                input.channels()
            )));
        }
        match (self.output_side(input.height()), self.output_side(input.width())) {
            (Some(h), Some(w)) => Ok((h, w)),
            _ => Err(Error::shape("kernel larger than padded input")),
        }
    }

    #[inline]
    fn weight(&self, n: usize, m: usize, i: usize, j: usize) -> f64 {
        let k = self.size;
        self.weights[((n * self.in_channels + m) * k + i) * k + j]
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, Vec::len)
    }
}

/// Geometry of one kernel tap sliding over one plane.
#[derive(Clone, Copy)]
struct Geom {
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
    stride: usize,
    pad: usize,
}

impl Geom {
    /// Output indices `o` with `o·stride + tap − pad` inside `[0, len)`.
    #[inline]
    fn valid(out_len: usize, in_len: usize, tap: usize, stride: usize, pad: usize) -> (usize, usize) {
        let lo = if pad > tap { (pad - tap).div_ceil(stride) } else { 0 };
        let hi = if in_len + pad > tap { ((in_len + pad - tap - 1) / stride + 1).min(out_len) } else { 0 };
        (lo, hi.max(lo))
    }

    /// Calls `f(out_index, in_index)` for every valid position of tap (i, j).
    #[inline]
    fn for_each_row(&self, i: usize, j: usize, mut f: impl FnMut(usize, usize, usize)) {
        let (ylo, yhi) = Self::valid(self.out_h, self.in_h, i, self.stride, self.pad);
        let (xlo, xhi) = Self::valid(self.out_w, self.in_w, j, self.stride, self.pad);
        if xlo >= xhi {
            return;
        }
        for oy in ylo..yhi {
            let iy = oy * self.stride + i - self.pad;
            // row start indices and count of valid columns
            f(oy * self.out_w + xlo, iy * self.in_w + xlo * self.stride + j - self.pad, xhi - xlo);
        }
    }
}

#[inline]
fn axpy_strided(out: &mut [f64], inp: &[f64], w: f64, stride: usize) {
    if stride == 1 {
        for (o, x) in out.iter_mut().zip(inp) {
            *o += w * x;
        }
    } else {
        for (o, x) in out.iter_mut().zip(inp.iter().step_by(stride)) {
            *o += w * x;
        }
    }
}

/// out_plane += w · (in_plane correlated at tap (i, j)).
fn accumulate_tap(out: &mut [f64], inp: &[f64], w: f64, i: usize, j: usize, g: &Geom) {
    if w == 0.0 {
        return;
    }
    g.for_each_row(i, j, |o, s, n| {
        let span = (n - 1) * g.stride + 1;
        axpy_strided(&mut out[o..o + n], &inp[s..s + span], w, g.stride);
    });
}

/// Σ over positions of go[out] · in[in] for tap (i, j).
fn correlate_tap(go: &[f64], inp: &[f64], i: usize, j: usize, g: &Geom) -> f64 {
    let mut acc = 0.0;
    g.for_each_row(i, j, |o, s, n| {
        acc += go[o..o + n].iter().zip(inp[s..].iter().step_by(g.stride)).map(|(a, b)| a * b).sum::<f64>();
    });
    acc
}

/// gi[in] += w · go[out] for tap (i, j).
fn scatter_tap(gi: &mut [f64], go: &[f64], w: f64, i: usize, j: usize, g: &Geom) {
    if w == 0.0 {
        return;
    }
    g.for_each_row(i, j, |o, s, n| {
        for (k, gv) in go[o..o + n].iter().enumerate() {
            gi[s + k * g.stride] += w * gv;
        }
    });
}

fn fill_bias(out: &mut Tensor, bias: &Option<Vec<f64>>) {
    if let Some(b) = bias {
        for (n, bv) in b.iter().enumerate() {
            out.plane_mut(n).iter_mut().for_each(|v| *v = *bv);
        }
    }
}

fn geom(input: &Tensor, k: &ConvKernel, out_h: usize, out_w: usize) -> Geom {
    Geom { in_h: input.height(), in_w: input.width(), out_h, out_w, stride: k.stride, pad: k.padding }
}

fn expect_kind(k: &ConvKernel, kind: ConvKind) -> Result<()> {
    if k.kind != kind {
        return Err(Error::shape(format!("expected a {kind:?} kernel, got {:?}", k.kind)));
    }
    Ok(())
}

/// Direct zero-padded strided convolution:
/// `G[n, y, x] = Σ_{m,i,j} K[n, m, i, j] · F[m, y·s + i − p, x·s + j − p]`.
pub fn conv2d(input: &Tensor, k: &ConvKernel) -> Result<Tensor> {
    expect_kind(k, ConvKind::Conventional)?;
    let (oh, ow) = k.output_shape(input)?;
    let g = geom(input, k, oh, ow);
    let mut out = Tensor::zeros(k.out_channels, oh, ow);
    fill_bias(&mut out, &k.bias);
    for n in 0..k.out_channels {
        let out_plane = out.plane_mut(n);
        for m in 0..k.in_channels {
            let in_plane = input.plane(m);
            for i in 0..k.size {
                for j in 0..k.size {
                    accumulate_tap(out_plane, in_plane, k.weight(n, m, i, j), i, j, &g);
                }
            }
        }
    }
    Ok(out)
}

/// Same result as [`conv2d`] via an explicit patch matrix and a GEMM.
pub fn conv2d_im2col(input: &Tensor, k: &ConvKernel) -> Result<Tensor> {
    expect_kind(k, ConvKind::Conventional)?;
    let (oh, ow) = k.output_shape(input)?;
    let g = geom(input, k, oh, ow);
    let rows = k.in_channels * k.size * k.size;
    let cols = oh * ow;
    let mut patches = vec![0.0; rows * cols];
    for m in 0..k.in_channels {
        let in_plane = input.plane(m);
        for i in 0..k.size {
            for j in 0..k.size {
                let r = (m * k.size + i) * k.size + j;
                let row = &mut patches[r * cols..(r + 1) * cols];
                g.for_each_row(i, j, |o, s, n| {
                    for c in 0..n {
                        row[o + c] = in_plane[s + c * g.stride];
                    }
                });
            }
        }
    }
    let mut out = Tensor::zeros(k.out_channels, oh, ow);
    fill_bias(&mut out, &k.bias);
    for n in 0..k.out_channels {
        let out_plane = out.plane_mut(n);
        for r in 0..rows {
            let w = k.weights[n * rows + r];
            for (o, p) in out_plane.iter_mut().zip(&patches[r * cols..(r + 1) * cols]) {
                *o += w * p;
            }
        }
    }
    Ok(out)
}

/// Per-channel spatial filtering: channel `m` of the output is channel `m`
/// of the input correlated with filter `m`.
pub fn depthwise_conv(input: &Tensor, k: &ConvKernel) -> Result<Tensor> {
    expect_kind(k, ConvKind::Depthwise)?;
    let (oh, ow) = k.output_shape(input)?;
    let g = geom(input, k, oh, ow);
    let mut out = Tensor::zeros(k.out_channels, oh, ow);
    fill_bias(&mut out, &k.bias);
    let kk = k.size * k.size;
    for m in 0..k.in_channels {
        let in_plane = input.plane(m);
        let out_plane = out.plane_mut(m);
        for i in 0..k.size {
            for j in 0..k.size {
                accumulate_tap(out_plane, in_plane, k.weights[m * kk + i * k.size + j], i, j, &g);
            }
        }
    }
    Ok(out)
}

/// 1×1 convolution: an `N × M` matrix applied at every pixel.
pub fn pointwise_conv(input: &Tensor, k: &ConvKernel) -> Result<Tensor> {
    expect_kind(k, ConvKind::Pointwise)?;
    let (oh, ow) = k.output_shape(input)?;
    let mut out = Tensor::zeros(k.out_channels, oh, ow);
    fill_bias(&mut out, &k.bias);
    for n in 0..k.out_channels {
        let out_plane = out.plane_mut(n);
        for m in 0..k.in_channels {
            let w = k.weights[n * k.in_channels + m];
            if w != 0.0 {
                for (o, x) in out_plane.iter_mut().zip(input.plane(m)) {
                    *o += w * x;
                }
            }
        }
    }
    Ok(out)
}

/// Dispatches on the kernel kind.
pub fn conv_forward(input: &Tensor, k: &ConvKernel) -> Result<Tensor> {
    match k.kind {
        ConvKind::Conventional => conv2d(input, k),
        ConvKind::Depthwise => depthwise_conv(input, k),
        ConvKind::Pointwise => pointwise_conv(input, k),
    }
}

/// Gradients of a convolution with respect to its input and parameters.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

/// Backpropagates `grad_out` (shaped like the forward output).
pub fn conv_backward(input: &Tensor, k: &ConvKernel, grad_out: &Tensor) -> Result<ConvGrads> {
    let (oh, ow) = k.output_shape(input)?;
    if grad_out.shape() != (k.out_channels, oh, ow) {
        return Err(Error::shape("output gradient shape does not match forward output"));
    }
    let g = geom(input, k, oh, ow);
    let mut gi = Tensor::zeros(input.channels(), input.height(), input.width());
    let mut gw = vec![0.0; k.weights.len()];
    let ks = k.size;
    match k.kind {
        ConvKind::Conventional => {
            for n in 0..k.out_channels {
                let go = grad_out.plane(n);
                for m in 0..k.in_channels {
                    let inp = input.plane(m);
                    for i in 0..ks {
                        for j in 0..ks {
                            let idx = ((n * k.in_channels + m) * ks + i) * ks + j;
                            gw[idx] = correlate_tap(go, inp, i, j, &g);
                            scatter_tap(gi.plane_mut(m), go, k.weights[idx], i, j, &g);
                        }
                    }
                }
            }
        }
        ConvKind::Depthwise => {
            for m in 0..k.in_channels {
                let go = grad_out.plane(m);
                let inp = input.plane(m);
                for i in 0..ks {
                    for j in 0..ks {
                        let idx = (m * ks + i) * ks + j;
                        gw[idx] = correlate_tap(go, inp, i, j, &g);
                        scatter_tap(gi.plane_mut(m), go, k.weights[idx], i, j, &g);
                    }
                }
            }
        }
        ConvKind::Pointwise => {
            for n in 0..k.out_channels {
                let go = grad_out.plane(n);
                for m in 0..k.in_channels {
                    let idx = n * k.in_channels + m;
                    gw[idx] = go.iter().zip(input.plane(m)).map(|(a, b)| a * b).sum();
                    let w = k.weights[idx];
                    if w != 0.0 {
                        for (d, gv) in gi.plane_mut(m).iter_mut().zip(go) {
                            *d += w * gv;
                        }
                    }
                }
            }
        }
    }
    let bias = k.bias.as_ref().map(|_| (0..k.out_channels).map(|n| grad_out.plane(n).iter().sum()).collect());
    Ok(ConvGrads { input: gi, weights: gw, bias })
}
