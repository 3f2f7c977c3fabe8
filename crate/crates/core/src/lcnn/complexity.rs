use serde::Serialize;

use super::arch::{Architecture, LayerSpec};
use crate::error::{Error, Result};

/// Shape of a convolution for cost accounting. `feature_side` is the side
/// of the output map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub kernel: u64,
    pub in_channels: u64,
    pub out_channels: u64,
    pub feature_side: u64,
}

impl ConvShape {
    pub fn new(kernel: u64, in_channels: u64, out_channels: u64, feature_side: u64) -> Self {
        Self { kernel, in_channels, out_channels, feature_side }
    }

    /// `D_k² · M · N · D_f²`
    pub fn conventional_macs(&self) -> u64 {
        self.kernel * self.kernel * self.in_channels * self.out_channels * self.feature_side * self.feature_side
    }

    /// `D_k² · M · D_f²`
    pub fn depthwise_macs(&self) -> u64 {
        self.kernel * self.kernel * self.in_channels * self.feature_side * self.feature_side
    }

    /// `N · M · D_f²`
    pub fn pointwise_macs(&self) -> u64 {
        self.out_channels * self.in_channels * self.feature_side * self.feature_side
    }

    /// Depthwise plus pointwise cost.
    pub fn separable_macs(&self) -> u64 {
        self.depthwise_macs() + self.pointwise_macs()
    }

    /// Separable cost over conventional cost.
    pub fn reduction(&self) -> f64 {
        self.separable_macs() as f64 / self.conventional_macs() as f64
    }
}

/// `1/N + 1/D_k²`.
pub fn reduction_closed_form(out_channels: u64, kernel: u64) -> f64 {
    1.0 / out_channels as f64 + 1.0 / (kernel * kernel) as f64
}

/// Cost of a single convolution-type layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complexity {
    /// Multiplies the layer performs as specified.
    pub macs: u64,
    /// Cost of a conventional convolution with the same shape.
    pub conventional_macs: u64,
    /// Cost of the depthwise-separable factorization of that shape.
    pub separable_macs: u64,
    /// `separable_macs / conventional_macs`.
    pub reduction: f64,
}

/// Shape a conv-type layer implies. Depthwise layers count as `M → M`,
/// pointwise layers as `1×1` convolutions.
pub fn conv_shape(layer: &LayerSpec, input_side: usize) -> Result<ConvShape> {
    let shape = |k: usize, m: usize, n: usize| -> Result<ConvShape> {
        let (_, side) = layer.output_shape(m, input_side)?;
        Ok(ConvShape::new(k as u64, m as u64, n as u64, side as u64))
    };
    match *layer {
        LayerSpec::Conv { in_channels, out_channels, kernel, .. } => shape(kernel, in_channels, out_channels),
        LayerSpec::Depthwise { channels, kernel, .. } => shape(kernel, channels, channels),
        LayerSpec::Pointwise { in_channels, out_channels } => shape(1, in_channels, out_channels),
        _ => Err(Error::Type(format!("{} is not a convolution layer", layer.op_name()))),
    }
}

/// MAC figures for one convolution-type layer at the given input side.
pub fn complexity(layer: &LayerSpec, input_side: usize) -> Result<Complexity> {
    let s = conv_shape(layer, input_side)?;
    let macs = match layer {
        LayerSpec::Depthwise { .. } => s.depthwise_macs(),
        _ => s.conventional_macs(),
    };
    Ok(Complexity {
        macs,
        conventional_macs: s.conventional_macs(),
        separable_macs: s.separable_macs(),
        reduction: s.reduction(),
    })
}

/// One row of an architecture cost table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerCost {
    pub index: usize,
    pub op: String,
    pub kernel: u64,
    pub in_channels: u64,
    pub out_channels: u64,
    pub feature_side: u64,
    /// Multiplies actually executed.
    pub macs: u64,
    /// What a conventional layer doing the same job would cost. For a
    /// depthwise/pointwise pair the whole figure sits on the depthwise row.
    pub conventional_equivalent: u64,
    /// For a conventional layer: what factorizing it would save. For a
    /// separable pair: the pair's cost over its conventional equivalent.
    pub reduction: f64,
    pub parameters: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostTotals {
    pub macs: u64,
    pub conventional_equivalent: u64,
    pub reduction: f64,
    pub parameters: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchitectureCost {
    pub rows: Vec<LayerCost>,
    pub totals: CostTotals,
}

/// Per-layer MAC and parameter table for the backbone convolutions.
///
/// A depthwise layer directly followed (after any BN/ReLU) by a pointwise
/// layer is priced as one separable block.
pub fn analyze(arch: &Architecture) -> Result<ArchitectureCost> {
    let shapes = arch.backbone_shapes()?;
    let n = arch.backbone_len();
    let mut rows: Vec<LayerCost> = Vec::new();
    let mut pending_dw: Option<usize> = None;
    for idx in 0..n {
        let layer = &arch.layers[idx];
        if !layer.is_conv() {
            continue;
        }
        let input_side = if idx == 0 { arch.input_side() } else { shapes[idx - 1].1 };
        let s = conv_shape(layer, input_side)?;
        let mut row = LayerCost {
            index: idx,
            op: layer.op_name().to_string(),
            kernel: s.kernel,
            in_channels: s.in_channels,
            out_channels: s.out_channels,
            feature_side: s.feature_side,
            macs: 0,
            conventional_equivalent: 0,
            reduction: 0.0,
            parameters: 0,
        };
        match layer {
            LayerSpec::Conv { .. } => {
                row.macs = s.conventional_macs();
                row.conventional_equivalent = row.macs;
                row.reduction = s.reduction();
                row.parameters = s.kernel * s.kernel * s.in_channels * s.out_channels;
                pending_dw = None;
            }
            LayerSpec::Depthwise { .. } => {
                row.macs = s.depthwise_macs();
                row.conventional_equivalent = row.macs;
                row.reduction = 1.0;
                row.parameters = s.kernel * s.kernel * s.in_channels;
                pending_dw = Some(rows.len());
            }
            LayerSpec::Pointwise { .. } => {
                row.macs = s.pointwise_macs();
                row.conventional_equivalent = row.macs;
                row.reduction = 1.0;
                row.parameters = s.in_channels * s.out_channels;
                if let Some(d) = pending_dw.take() {
                    let dw = &mut rows[d];
                    let pair = ConvShape::new(dw.kernel, dw.in_channels, s.out_channels, dw.feature_side);
                    if dw.feature_side == s.feature_side && dw.out_channels == s.in_channels {
                        dw.conventional_equivalent = pair.conventional_macs();
                        dw.reduction = pair.reduction();
                        row.conventional_equivalent = 0;
                        row.reduction = pair.reduction();
                    }
                }
            }
            _ => unreachable!(),
        }
        rows.push(row);
    }
    let macs = rows.iter().map(|r| r.macs).sum();
    let conventional_equivalent: u64 = rows.iter().map(|r| r.conventional_equivalent).sum();
    let totals = CostTotals {
        macs,
        conventional_equivalent,
        reduction: if conventional_equivalent == 0 { 0.0 } else { macs as f64 / conventional_equivalent as f64 },
        parameters: rows.iter().map(|r| r.parameters).sum(),
    };
    Ok(ArchitectureCost { rows, totals })
}
