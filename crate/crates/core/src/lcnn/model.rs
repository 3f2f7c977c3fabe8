use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{lcnn_architecture, Architecture, LayerSpec, LcnnConfig, Tap};
use super::conv::{conv_backward, conv_forward, ConvKernel, ConvKind};
use super::layers::{relu, relu_backward, softmax, BatchNorm};
use super::ssd::{decode, default_boxes, select_detections, CenterBox};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::imagecore::{to_grayscale, BoundingBox, Detection, Image};

pub const DEFAULT_CONF_THRESHOLD: f64 = 0.5;
pub const DEFAULT_NMS_IOU: f64 = 0.45;

/// A layer with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// Backbone convolution of any kind, without bias.
    Conv(ConvKernel),
    BatchNorm(BatchNorm),
    Relu,
    /// Per-box class logits computed from backbone layer `source`.
    SoftmaxHead { source: usize, classes: usize, kernel: ConvKernel },
    /// Per-box offsets computed from backbone layer `source`.
    BboxRegressor { source: usize, kernel: ConvKernel },
}

impl Layer {
    fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv(k) => match k.kind {
                ConvKind::Conventional => LayerSpec::Conv {
                    in_channels: k.in_channels,
                    out_channels: k.out_channels,
                    kernel: k.size,
                    stride: k.stride,
                    padding: k.padding,
                },
                ConvKind::Depthwise => {
                    LayerSpec::Depthwise { channels: k.in_channels, kernel: k.size, stride: k.stride, padding: k.padding }
                }
                ConvKind::Pointwise => LayerSpec::Pointwise { in_channels: k.in_channels, out_channels: k.out_channels },
            },
            Layer::BatchNorm(bn) => LayerSpec::Batchnorm { channels: bn.channels() },
            Layer::Relu => LayerSpec::Relu,
            Layer::SoftmaxHead { source, classes, kernel } => LayerSpec::SoftmaxHead {
                source: *source,
                in_channels: kernel.in_channels,
                boxes_per_location: kernel.out_channels / (*classes).max(1),
                classes: *classes,
                kernel: kernel.size,
                padding: kernel.padding,
            },
            Layer::BboxRegressor { source, kernel } => LayerSpec::BboxRegressor {
                source: *source,
                in_channels: kernel.in_channels,
                boxes_per_location: kernel.out_channels / 4,
                kernel: kernel.size,
                padding: kernel.padding,
            },
        }
    }
}

/// Raw head predictions for one input, ordered tap → row → column → box.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutput {
    pub classes: usize,
    /// `len × classes` logits.
    pub logits: Vec<f64>,
    /// `len × 4` offsets.
    pub offsets: Vec<f64>,
}

impl HeadOutput {
    pub fn len(&self) -> usize {
        self.offsets.len() / 4
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Per-box softmax, `len × classes`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.logits.chunks(self.classes).flat_map(softmax).collect()
    }

    /// Probability of class 1 (human) per box.
    pub fn human_scores(&self) -> Vec<f64> {
        self.probabilities().chunks(self.classes).map(|p| p[1]).collect()
    }
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    pub input: Tensor,
    /// Output of each backbone layer.
    pub activations: Vec<Tensor>,
    /// Output of each head layer, in layer order.
    pub head_maps: Vec<Tensor>,
    pub output: HeadOutput,
}

/// The network: architecture plus weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    arch: Architecture,
    layers: Vec<Layer>,
    taps: Vec<Tap>,
    shapes: Vec<(usize, usize)>,
}

fn round_f32(values: &mut [f64]) {
    values.iter_mut().for_each(|v| *v = *v as f32 as f64);
}

fn he_uniform(rng: &mut ChaCha8Rng, count: usize, fan_in: usize) -> Vec<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..count).map(|_| rng.gen_range(-bound..bound) as f32 as f64).collect()
}

impl CnnModel {
    /// Builds the network described by `arch` with seeded He-uniform
    /// weights, unit BN scale and zero shifts.
    pub fn initialize(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(arch.layers.len());
        for spec in &arch.layers {
            let layer = match *spec {
                LayerSpec::Conv { in_channels, out_channels, kernel, stride, padding } => {
                    let w = he_uniform(&mut rng, out_channels * in_channels * kernel * kernel, in_channels * kernel * kernel);
                    Layer::Conv(ConvKernel::conventional(out_channels, in_channels, kernel, stride, padding, w)?)
                }
                LayerSpec::Depthwise { channels, kernel, stride, padding } => {
                    let w = he_uniform(&mut rng, channels * kernel * kernel, kernel * kernel);
                    Layer::Conv(ConvKernel::depthwise(channels, kernel, stride, padding, w)?)
                }
                LayerSpec::Pointwise { in_channels, out_channels } => {
                    let w = he_uniform(&mut rng, in_channels * out_channels, in_channels);
                    Layer::Conv(ConvKernel::pointwise(out_channels, in_channels, w)?)
                }
                LayerSpec::Batchnorm { channels } => Layer::BatchNorm(BatchNorm::identity(channels)),
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::SoftmaxHead { source, in_channels, boxes_per_location, classes, kernel, padding } => {
                    let out = boxes_per_location * classes;
                    let w = he_uniform(&mut rng, out * in_channels * kernel * kernel, in_channels * kernel * kernel);
                    let k = ConvKernel::conventional(out, in_channels, kernel, 1, padding, w)?.with_bias(vec![0.0; out])?;
                    Layer::SoftmaxHead { source, classes, kernel: k }
                }
                LayerSpec::BboxRegressor { source, in_channels, boxes_per_location, kernel, padding } => {
                    let out = boxes_per_location * 4;
                    let w = he_uniform(&mut rng, out * in_channels * kernel * kernel, in_channels * kernel * kernel);
                    let k = ConvKernel::conventional(out, in_channels, kernel, 1, padding, w)?.with_bias(vec![0.0; out])?;
                    Layer::BboxRegressor { source, kernel: k }
                }
            };
            layers.push(layer);
        }
        Self::from_layers(arch.input, layers, arch.priors)
    }

    /// Assembles a model from explicit layers, deriving and validating the
    /// architecture.
    pub fn from_layers(input: [usize; 3], layers: Vec<Layer>, priors: super::ssd::PriorConfig) -> Result<Self> {
        for (i, layer) in layers.iter().enumerate() {
            match layer {
                Layer::Conv(k) if k.bias.is_some() => {
                    return Err(Error::shape(format!("backbone conv {i} must not carry a bias")));
                }
                Layer::SoftmaxHead { kernel, .. } | Layer::BboxRegressor { kernel, .. } => {
                    if kernel.kind != ConvKind::Conventional || kernel.bias.is_none() || kernel.stride != 1 {
                        return Err(Error::shape(format!("head layer {i} must be a biased stride-1 convolution")));
                    }
                }
                _ => {}
            }
            if let Layer::SoftmaxHead { classes, kernel, .. } = layer {
                if *classes == 0 || kernel.out_channels % classes != 0 {
                    return Err(Error::shape("class head outputs must be a multiple of the class count"));
                }
            }
            if let Layer::BboxRegressor { kernel, .. } = layer {
                if kernel.out_channels % 4 != 0 {
                    return Err(Error::shape("box regressor outputs must be a multiple of 4"));
                }
            }
        }
        let arch = Architecture { input, layers: layers.iter().map(Layer::spec).collect(), priors };
        let taps = arch.validate()?;
        let shapes = arch.backbone_shapes()?;
        Ok(Self { arch, layers, taps, shapes })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.arch.input
    }

    pub fn input_side(&self) -> usize {
        self.arch.input[1]
    }

    pub fn conv_layer_count(&self) -> usize {
        self.arch.conv_layer_count()
    }

    fn backbone_len(&self) -> usize {
        self.shapes.len()
    }

    /// Side of each tapped feature map.
    pub fn tap_sides(&self) -> Vec<usize> {
        self.taps.iter().map(|t| self.shapes[t.source].1).collect()
    }

    pub fn default_boxes(&self) -> Vec<CenterBox> {
        default_boxes(&self.tap_sides(), &self.arch.priors)
    }

    pub fn prediction_count(&self) -> usize {
        self.taps.iter().map(|t| self.shapes[t.source].1.pow(2) * t.boxes).sum()
    }

    /// Every trainable or stored value.
    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv(k) | Layer::SoftmaxHead { kernel: k, .. } | Layer::BboxRegressor { kernel: k, .. } => {
                    k.parameter_count()
                }
                Layer::BatchNorm(bn) => 4 * bn.channels(),
                Layer::Relu => 0,
            })
            .sum()
    }

    /// Trainable parameter vectors in a fixed order.
    pub fn parameters(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(k) | Layer::SoftmaxHead { kernel: k, .. } | Layer::BboxRegressor { kernel: k, .. } => {
                    out.push(&k.weights);
                    if let Some(b) = &k.bias {
                        out.push(b);
                    }
                }
                Layer::BatchNorm(bn) => {
                    out.push(&bn.gamma);
                    out.push(&bn.beta);
                }
                Layer::Relu => {}
            }
        }
        out
    }

    /// Mutable view in the same order as [`CnnModel::parameters`].
    pub fn parameters_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(k) | Layer::SoftmaxHead { kernel: k, .. } | Layer::BboxRegressor { kernel: k, .. } => {
                    out.push(&mut k.weights);
                    if let Some(b) = &mut k.bias {
                        out.push(b);
                    }
                }
                Layer::BatchNorm(bn) => {
                    out.push(&mut bn.gamma);
                    out.push(&mut bn.beta);
                }
                Layer::Relu => {}
            }
        }
        out
    }

    /// Rounds every parameter to the nearest `f32`.
    pub fn round_parameters(&mut self) {
        for p in self.parameters_mut() {
            round_f32(p);
        }
        for layer in &mut self.layers {
            if let Layer::BatchNorm(bn) = layer {
                round_f32(&mut bn.mean);
                round_f32(&mut bn.var);
            }
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        let [c, h, w] = self.arch.input;
        if input.shape() != (c, h, w) {
            return Err(Error::shape(format!(
                "model expects a {c}x{h}x{w} input, got {}x{}x{}",
                input.channels(),
                input.height(),
                input.width()
            )));
        }
        Ok(())
    }

    fn apply_backbone(&self, layer: &Layer, x: &Tensor) -> Result<Tensor> {
        match layer {
            Layer::Conv(k) => conv_forward(x, k),
            Layer::BatchNorm(bn) => bn.forward(x),
            Layer::Relu => Ok(relu(x)),
            _ => unreachable!("head layers are not part of the backbone"),
        }
    }

    /// Full forward pass keeping every intermediate map.
    pub fn forward_trace(&self, input: &Tensor) -> Result<Trace> {
        self.check_input(input)?;
        let n = self.backbone_len();
        let mut activations: Vec<Tensor> = Vec::with_capacity(n);
        for (i, layer) in self.layers[..n].iter().enumerate() {
            let x = if i == 0 { input } else { &activations[i - 1] };
            let y = self.apply_backbone(layer, x)?;
            activations.push(y);
        }
        let mut head_maps = Vec::new();
        for layer in &self.layers[n..] {
            match layer {
                Layer::SoftmaxHead { source, kernel, .. } | Layer::BboxRegressor { source, kernel } => {
                    head_maps.push(conv_forward(&activations[*source], kernel)?);
                }
                _ => unreachable!("validated head"),
            }
        }
        let output = self.flatten(&head_maps);
        Ok(Trace { input: input.clone(), activations, head_maps, output })
    }

    /// Forward pass returning only the head output.
    pub fn forward(&self, input: &Tensor) -> Result<HeadOutput> {
        self.check_input(input)?;
        let n = self.backbone_len();
        let last_needed = self.taps.iter().map(|t| t.source).max().unwrap_or(n.saturating_sub(1));
        let mut kept: Vec<Option<Tensor>> = vec![None; n];
        let mut current = input.clone();
        for (i, layer) in self.layers[..=last_needed.min(n - 1)].iter().enumerate() {
            current = self.apply_backbone(layer, &current)?;
            if self.taps.iter().any(|t| t.source == i) {
                kept[i] = Some(current.clone());
            }
        }
        let mut head_maps = Vec::new();
        for layer in &self.layers[n..] {
            match layer {
                Layer::SoftmaxHead { source, kernel, .. } | Layer::BboxRegressor { source, kernel } => {
                    let src = kept[*source].as_ref().expect("tapped map kept");
                    head_maps.push(conv_forward(src, kernel)?);
                }
                _ => unreachable!("validated head"),
            }
        }
        Ok(self.flatten(&head_maps))
    }

    fn flatten(&self, head_maps: &[Tensor]) -> HeadOutput {
        let n = self.backbone_len();
        let classes = self.taps.first().map_or(2, |t| t.classes);
        let mut logits = Vec::new();
        let mut offsets = Vec::new();
        for tap in &self.taps {
            let cls = &head_maps[tap.cls_layer - n];
            let loc = &head_maps[tap.loc_layer - n];
            for y in 0..cls.height() {
                for x in 0..cls.width() {
                    for b in 0..tap.boxes {
                        for c in 0..classes {
                            logits.push(cls.get(b * classes + c, y, x));
                        }
                        for k in 0..4 {
                            offsets.push(loc.get(b * 4 + k, y, x));
                        }
                    }
                }
            }
        }
        HeadOutput { classes, logits, offsets }
    }

    /// Gradients of a scalar loss with respect to every parameter, given
    /// dL/dlogits and dL/doffsets. Order matches [`CnnModel::parameters`].
    pub fn backward(&self, trace: &Trace, grad_logits: &[f64], grad_offsets: &[f64]) -> Result<Vec<Vec<f64>>> {
        if grad_logits.len() != trace.output.logits.len() || grad_offsets.len() != trace.output.offsets.len() {
            return Err(Error::shape("head gradient lengths do not match the forward output"));
        }
        let n = self.backbone_len();
        let classes = trace.output.classes;
        // unflatten head gradients
        let mut head_grads: Vec<Tensor> =
            trace.head_maps.iter().map(|m| Tensor::zeros(m.channels(), m.height(), m.width())).collect();
        let (mut li, mut oi) = (0, 0);
        for tap in &self.taps {
            let (ci, ri) = (tap.cls_layer - n, tap.loc_layer - n);
            let (h, w) = (head_grads[ci].height(), head_grads[ci].width());
            for y in 0..h {
                for x in 0..w {
                    for b in 0..tap.boxes {
                        for c in 0..classes {
                            head_grads[ci].set(b * classes + c, y, x, grad_logits[li]);
                            li += 1;
                        }
                        for k in 0..4 {
                            head_grads[ri].set(b * 4 + k, y, x, grad_offsets[oi]);
                            oi += 1;
                        }
                    }
                }
            }
        }

        let mut per_layer: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.layers.len()];
        let mut act_grads: Vec<Option<Tensor>> = vec![None; n];
        let add = |slot: &mut Option<Tensor>, g: Tensor| match slot {
            Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
            None => *slot = Some(g),
        };
        for (hi, layer) in self.layers[n..].iter().enumerate() {
            if let Layer::SoftmaxHead { source, kernel, .. } | Layer::BboxRegressor { source, kernel } = layer {
                let g = conv_backward(&trace.activations[*source], kernel, &head_grads[hi])?;
                add(&mut act_grads[*source], g.input);
                per_layer[n + hi] = vec![g.weights, g.bias.expect("head bias")];
            }
        }
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let Some(g_out) = act_grads[i].take() else {
                per_layer[i] = match layer {
                    Layer::Conv(k) => vec![vec![0.0; k.weights.len()]],
                    Layer::BatchNorm(bn) => vec![vec![0.0; bn.channels()]; 2],
                    _ => Vec::new(),
                };
                continue;
            };
            let x = if i == 0 { &trace.input } else { &trace.activations[i - 1] };
            let g_in = match layer {
                Layer::Conv(k) => {
                    let g = conv_backward(x, k, &g_out)?;
                    per_layer[i] = vec![g.weights];
                    g.input
                }
                Layer::BatchNorm(bn) => {
                    let g = bn.backward(x, &g_out)?;
                    per_layer[i] = vec![g.gamma, g.beta];
                    g.input
                }
                Layer::Relu => relu_backward(x, &g_out),
                _ => unreachable!("head layers are not part of the backbone"),
            };
            if i > 0 {
                add(&mut act_grads[i - 1], g_in);
            }
        }
        Ok(per_layer.into_iter().flatten().collect())
    }

    /// Sets each BN layer's mean/variance to the statistics of its input
    /// over `inputs`, so that activations start standardized.
    pub fn calibrate_batchnorm(&mut self, inputs: &[Tensor]) -> Result<()> {
        if inputs.is_empty() {
            return Ok(());
        }
        for x in inputs {
            self.check_input(x)?;
        }
        let n = self.backbone_len();
        let mut batch: Vec<Tensor> = inputs.to_vec();
        for i in 0..n {
            if let Layer::BatchNorm(bn) = &mut self.layers[i] {
                for c in 0..bn.channels() {
                    let vals: Vec<f64> = batch.iter().flat_map(|t| t.plane(c).iter().copied()).collect();
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
                    bn.mean[c] = mean as f32 as f64;
                    bn.var[c] = var as f32 as f64;
                }
            }
            let layer = &self.layers[i];
            batch = batch.iter().map(|t| self.apply_backbone(layer, t)).collect::<Result<_>>()?;
        }
        Ok(())
    }

    /// Decoded boxes (input pixels, clamped to the input square) and human
    /// scores for every default box.
    pub fn predict_boxes(&self, input: &Tensor) -> Result<(Vec<BoundingBox>, Vec<f64>)> {
        let out = self.forward(input)?;
        let side = self.input_side() as f64;
        let boxes = self
            .default_boxes()
            .iter()
            .zip(out.offsets.chunks(4))
            .map(|(p, o)| decode(p, o, self.arch.priors.variances).to_bbox(side))
            .collect();
        Ok((boxes, out.human_scores()))
    }

    /// Detections on an input tensor, in input pixel coordinates.
    pub fn detect_tensor(&self, input: &Tensor, conf_threshold: f64, nms_iou: f64) -> Result<Vec<Detection>> {
        let (boxes, scores) = self.predict_boxes(input)?;
        Ok(select_detections(boxes, &scores, conf_threshold, nms_iou))
    }
}

/// Default network at the given width/input size.
pub fn build_lcnn(cfg: &LcnnConfig, seed: u64) -> Result<CnnModel> {
    CnnModel::initialize(lcnn_architecture(cfg)?, seed)
}

/// Resizes (nearest) to the model input, matches channel count and maps
/// pixel values from `[0, 255]` to `[-1, 1]`.
pub fn image_to_tensor(img: &Image, channels: usize, side: usize) -> Result<Tensor> {
    let resized = img.resize_nearest(side, side)?;
    let src = match (channels, resized.channels()) {
        (1, 3) => to_grayscale(&resized),
        (3, 1) => resized.to_rgb(),
        (c, s) if c == s => resized,
        (c, s) => return Err(Error::Channel(format!("cannot feed a {s}-channel image to a {c}-channel model"))),
    };
    Ok(Tensor::from_fn(channels, side, side, |c, y, x| src.get(x, y, c) / 127.5 - 1.0))
}

/// One forward pass on an image of any size; boxes are reported in the
/// image's own coordinates.
pub fn ssd_detect(model: &CnnModel, img: &Image, conf_threshold: f64, nms_iou: f64) -> Result<Vec<Detection>> {
    let [c, side, _] = model.input_shape();
    let input = image_to_tensor(img, c, side)?;
    let sx = img.width() as f64 / side as f64;
    let sy = img.height() as f64 / side as f64;
    let dets = model.detect_tensor(&input, conf_threshold, nms_iou)?;
    Ok(dets.into_iter().map(|mut d| {
        d.bbox = d.bbox.scaled(sx, sy);
        d
    }).collect())
}
