use serde::{Deserialize, Serialize};

use super::ssd::PriorConfig;
use crate::error::{Error, Result};

/// One entry of an architecture description.
///
/// Head entries (`softmax-head`, `bbox-regressor`) read the output of the
/// backbone layer named by `source` and must follow every backbone layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum LayerSpec {
    Conv { in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize },
    Depthwise { channels: usize, kernel: usize, stride: usize, padding: usize },
    Pointwise { in_channels: usize, out_channels: usize },
    Batchnorm { channels: usize },
    Relu,
    SoftmaxHead { source: usize, in_channels: usize, boxes_per_location: usize, classes: usize, kernel: usize, padding: usize },
    BboxRegressor { source: usize, in_channels: usize, boxes_per_location: usize, kernel: usize, padding: usize },
}

impl LayerSpec {
    pub fn op_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Depthwise { .. } => "depthwise",
            LayerSpec::Pointwise { .. } => "pointwise",
            LayerSpec::Batchnorm { .. } => "batchnorm",
            LayerSpec::Relu => "relu",
            LayerSpec::SoftmaxHead { .. } => "softmax-head",
            LayerSpec::BboxRegressor { .. } => "bbox-regressor",
        }
    }

    /// Backbone convolution (conventional, depthwise or pointwise).
    pub fn is_conv(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Depthwise { .. } | LayerSpec::Pointwise { .. })
    }

    pub fn is_head(&self) -> bool {
        matches!(self, LayerSpec::SoftmaxHead { .. } | LayerSpec::BboxRegressor { .. })
    }

    /// Output `(channels, side)` for an input of `(channels, side)`.
    pub fn output_shape(&self, channels: usize, side: usize) -> Result<(usize, usize)> {
        let spatial = |k: usize, s: usize, p: usize| -> Result<usize> {
            if k == 0 || s == 0 {
                return Err(Error::shape("kernel size and stride must be positive"));
            }
            if side + 2 * p < k {
                return Err(Error::shape(format!("kernel {k} does not fit a {side}-pixel map")));
            }
            Ok((side + 2 * p - k) / s + 1)
        };
        let need = |c: usize| -> Result<()> {
            if c != channels {
                return Err(Error::shape(format!("{} expects {c} channels, previous layer gives {channels}", self.op_name())));
            }
            Ok(())
        };
        match *self {
            LayerSpec::Conv { in_channels, out_channels, kernel, stride, padding } => {
                need(in_channels)?;
                if out_channels == 0 {
                    return Err(Error::shape("conv needs at least one output channel"));
                }
                Ok((out_channels, spatial(kernel, stride, padding)?))
            }
            LayerSpec::Depthwise { channels: c, kernel, stride, padding } => {
                need(c)?;
                Ok((c, spatial(kernel, stride, padding)?))
            }
            LayerSpec::Pointwise { in_channels, out_channels } => {
                need(in_channels)?;
                if out_channels == 0 {
                    return Err(Error::shape("pointwise needs at least one output channel"));
                }
                Ok((out_channels, side))
            }
            LayerSpec::Batchnorm { channels: c } => {
                need(c)?;
                Ok((c, side))
            }
            LayerSpec::Relu => Ok((channels, side)),
            LayerSpec::SoftmaxHead { in_channels, boxes_per_location, classes, kernel, padding, .. } => {
                need(in_channels)?;
                Ok((boxes_per_location * classes, spatial(kernel, 1, padding)?))
            }
            LayerSpec::BboxRegressor { in_channels, boxes_per_location, kernel, padding, .. } => {
                need(in_channels)?;
                Ok((boxes_per_location * 4, spatial(kernel, 1, padding)?))
            }
        }
    }
}

/// A network description: input shape, ordered layers and default-box setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    /// `[channels, height, width]`; height and width must be equal.
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub priors: PriorConfig,
}

/// A detection tap: paired class and box heads reading one backbone map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tap {
    pub source: usize,
    pub cls_layer: usize,
    pub loc_layer: usize,
    pub boxes: usize,
    pub classes: usize,
}

impl Architecture {
    pub fn from_json(text: &str) -> Result<Self> {
        let arch: Architecture = serde_json::from_str(text).map_err(|e| Error::format(format!("architecture JSON: {e}")))?;
        arch.validate()?;
        Ok(arch)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("architecture serializes")
    }

    pub fn input_side(&self) -> usize {
        self.input[1]
    }

    /// Number of leading layers that form the backbone.
    pub fn backbone_len(&self) -> usize {
        self.layers.iter().position(LayerSpec::is_head).unwrap_or(self.layers.len())
    }

    /// `(channels, side)` produced by each backbone layer.
    pub fn backbone_shapes(&self) -> Result<Vec<(usize, usize)>> {
        let [c, h, w] = self.input;
        if c == 0 || h == 0 || h != w {
            return Err(Error::shape(format!("input must be square and non-empty, got {c}x{h}x{w}")));
        }
        let mut shape = (c, h);
        let mut out = Vec::new();
        for layer in &self.layers[..self.backbone_len()] {
            shape = layer.output_shape(shape.0, shape.1)?;
            out.push(shape);
        }
        Ok(out)
    }

    /// Checks shape compatibility, head placement and pairing.
    pub fn validate(&self) -> Result<Vec<Tap>> {
        let shapes = self.backbone_shapes()?;
        let n = self.backbone_len();
        let mut taps: Vec<Tap> = Vec::new();
        let mut regressors = Vec::new();
        for (idx, layer) in self.layers.iter().enumerate().skip(n) {
            let (source, boxes) = match *layer {
                LayerSpec::SoftmaxHead { source, boxes_per_location, .. } => (source, boxes_per_location),
                LayerSpec::BboxRegressor { source, boxes_per_location, .. } => (source, boxes_per_location),
                _ => return Err(Error::shape(format!("layer {idx} ({}) follows the detection head", layer.op_name()))),
            };
            if source >= n {
                return Err(Error::shape(format!("head layer {idx} taps {source}, outside the backbone")));
            }
            if boxes == 0 {
                return Err(Error::shape("head needs at least one box per location"));
            }
            let (c, side) = shapes[source];
            let (_, out_side) = layer.output_shape(c, side)?;
            if out_side != side {
                return Err(Error::shape(format!("head layer {idx} must preserve the map size")));
            }
            match *layer {
                LayerSpec::SoftmaxHead { classes, .. } => {
                    if classes < 2 {
                        return Err(Error::shape("softmax head needs at least two classes"));
                    }
                    if taps.iter().any(|t| t.source == source) {
                        return Err(Error::shape(format!("source {source} tapped twice")));
                    }
                    taps.push(Tap { source, cls_layer: idx, loc_layer: usize::MAX, boxes, classes });
                }
                _ => regressors.push((idx, source, boxes)),
            }
        }
        for (idx, source, boxes) in regressors {
            let tap = taps
                .iter_mut()
                .find(|t| t.source == source && t.loc_layer == usize::MAX)
                .ok_or_else(|| Error::shape(format!("box regressor {idx} has no matching class head")))?;
            if tap.boxes != boxes {
                return Err(Error::shape("class and box heads disagree on boxes per location"));
            }
            tap.loc_layer = idx;
        }
        if let Some(t) = taps.iter().find(|t| t.loc_layer == usize::MAX) {
            return Err(Error::shape(format!("class head {} has no box regressor", t.cls_layer)));
        }
        if let Some(t) = taps.first() {
            if taps.iter().any(|x| x.classes != t.classes) {
                return Err(Error::shape("all class heads must share the class count"));
            }
            if self.priors.aspect_ratios.len() != t.boxes {
                return Err(Error::shape(format!(
                    "{} aspect ratios configured but heads predict {} boxes per location",
                    self.priors.aspect_ratios.len(),
                    t.boxes
                )));
            }
        }
        self.priors.validate()?;
        Ok(taps)
    }

    pub fn conv_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| l.is_conv()).count()
    }
}

/// Output channels and stride of each depthwise/pointwise pair after the
/// first conventional layer.
pub const SEPARABLE_SCHEDULE: [(usize, usize); 11] = [
    (64, 1),
    (128, 2),
    (128, 1),
    (256, 2),
    (256, 1),
    (512, 2),
    (512, 1),
    (512, 1),
    (512, 1),
    (512, 1),
    (1024, 2),
];

pub const STEM_CHANNELS: usize = 32;

/// Pairs whose output feeds the detection head (0-based).
pub const TAPPED_PAIRS: [usize; 2] = [9, 10];

/// Build options for the default network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcnnConfig {
    /// Channel scale; every width becomes `max(1, round(width · multiplier))`.
    pub width_multiplier: f64,
    /// Square input side in pixels.
    pub input_size: usize,
}

impl Default for LcnnConfig {
    fn default() -> Self {
        Self { width_multiplier: 1.0, input_size: 224 }
    }
}

impl LcnnConfig {
    pub fn width(&self, channels: usize) -> usize {
        ((channels as f64 * self.width_multiplier).round() as usize).max(1)
    }
}

/// Index of the final ReLU of separable pair `pair`.
pub fn pair_output_layer(pair: usize) -> usize {
    3 + 6 * pair + 5
}

/// The default 23-convolution network as data.
pub fn lcnn_architecture(cfg: &LcnnConfig) -> Result<Architecture> {
    if !(cfg.width_multiplier.is_finite() && cfg.width_multiplier > 0.0) {
        return Err(Error::config("width multiplier must be positive"));
    }
    if cfg.input_size < 32 {
        return Err(Error::config("input size must be at least 32 pixels"));
    }
    let mut layers = Vec::new();
    let mut channels = cfg.width(STEM_CHANNELS);
    layers.push(LayerSpec::Conv { in_channels: 3, out_channels: channels, kernel: 3, stride: 2, padding: 1 });
    layers.push(LayerSpec::Batchnorm { channels });
    layers.push(LayerSpec::Relu);
    for (out, stride) in SEPARABLE_SCHEDULE {
        let out = cfg.width(out);
        layers.push(LayerSpec::Depthwise { channels, kernel: 3, stride, padding: 1 });
        layers.push(LayerSpec::Batchnorm { channels });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::Pointwise { in_channels: channels, out_channels: out });
        layers.push(LayerSpec::Batchnorm { channels: out });
        layers.push(LayerSpec::Relu);
        channels = out;
    }
    let priors = PriorConfig::default();
    let boxes = priors.aspect_ratios.len();
    for pair in TAPPED_PAIRS {
        let source = pair_output_layer(pair);
        let in_channels = cfg.width(SEPARABLE_SCHEDULE[pair].0);
        layers.push(LayerSpec::SoftmaxHead { source, in_channels, boxes_per_location: boxes, classes: 2, kernel: 3, padding: 1 });
        layers.push(LayerSpec::BboxRegressor { source, in_channels, boxes_per_location: boxes, kernel: 3, padding: 1 });
    }
    let arch = Architecture { input: [3, cfg.input_size, cfg.input_size], layers, priors };
    arch.validate()?;
    Ok(arch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_23_convs_and_expected_taps() {
        let arch = lcnn_architecture(&LcnnConfig::default()).unwrap();
        assert_eq!(arch.conv_layer_count(), 23);
        assert!(matches!(arch.layers[0], LayerSpec::Conv { .. }));
        let shapes = arch.backbone_shapes().unwrap();
        let taps = arch.validate().unwrap();
        let sides: Vec<usize> = taps.iter().map(|t| shapes[t.source].1).collect();
        assert_eq!(sides, vec![14, 7]);
        assert_eq!(shapes[0], (32, 112));
        assert_eq!(*shapes.last().unwrap(), (1024, 7));
    }

    #[test]
    fn json_round_trip() {
        let arch = lcnn_architecture(&LcnnConfig { width_multiplier: 0.25, input_size: 64 }).unwrap();
        let back = Architecture::from_json(&arch.to_json()).unwrap();
        assert_eq!(back, arch);
    }

    #[test]
    fn incompatible_shapes_rejected() {
        let arch = Architecture {
            input: [3, 16, 16],
            layers: vec![
                LayerSpec::Conv { in_channels: 3, out_channels: 8, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::Pointwise { in_channels: 4, out_channels: 8 },
            ],
            priors: PriorConfig::default(),
        };
        assert!(matches!(arch.validate(), Err(Error::Shape(_))));
    }

    #[test]
    fn malformed_json_is_format_error() {
        assert!(matches!(Architecture::from_json("{\"input\": [3, 8]"), Err(Error::Format(_))));
        assert!(matches!(
            Architecture::from_json(r#"{"input":[3,8,8],"layers":[{"op":"pool"}]}"#),
            Err(Error::Format(_))
        ));
    }
}
