use super::conv::{conv2d, depthwise_conv, pointwise_conv, ConvKernel, ConvKind};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// The conventional kernel equal to depthwise `d` followed by pointwise
/// `p`: `K[n, m, i, j] = P[n, m] · D[m, i, j]`.
pub fn compose_separable(d: &ConvKernel, p: &ConvKernel) -> Result<ConvKernel> {
    if d.kind != ConvKind::Depthwise || p.kind != ConvKind::Pointwise {
        return Err(Error::shape("expected a depthwise and a pointwise kernel"));
    }
    if p.in_channels != d.out_channels {
        return Err(Error::shape("pointwise input channels must equal depthwise channels"));
    }
    if d.bias.is_some() || p.bias.is_some() {
        return Err(Error::shape("composition is defined for bias-free kernels"));
    }
    let (m_count, n_count, k) = (d.in_channels, p.out_channels, d.size);
    let mut w = Vec::with_capacity(n_count * m_count * k * k);
    for n in 0..n_count {
        for m in 0..m_count {
            let pw = p.weights[n * m_count + m];
            w.extend(d.weights[m * k * k..(m + 1) * k * k].iter().map(|dv| pw * dv));
        }
    }
    ConvKernel::conventional(n_count, m_count, k, d.stride, d.padding, w)
}

/// Largest elementwise relative deviation between the composed
/// conventional convolution and depthwise-then-pointwise.
pub fn factorized_equals_composed(d: &ConvKernel, p: &ConvKernel, input: &Tensor) -> Result<f64> {
    let composed = conv2d(input, &compose_separable(d, p)?)?;
    let factorized = pointwise_conv(&depthwise_conv(input, d)?, p)?;
    Ok(composed.max_rel_diff(&factorized, 1e-12))
}
