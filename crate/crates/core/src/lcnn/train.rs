use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{smooth_l1, softmax_backward};
use super::model::{image_to_tensor, CnnModel, HeadOutput};
use super::ssd::{encode, match_priors, CenterBox};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::imagecore::{BoundingBox, Image};

/// One training image with its human boxes in image pixels.
#[derive(Debug, Clone)]
pub struct ToySample {
    pub image: Image,
    pub boxes: Vec<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Full-batch gradient steps.
    pub steps: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// IoU at which a default box counts as matching a ground truth.
    pub match_iou: f64,
    /// Negatives kept per positive (highest-loss first); `None` keeps all.
    pub negative_ratio: Option<usize>,
    /// Fraction of samples held out for validation.
    pub validation_fraction: f64,
    /// Global gradient-norm ceiling.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            learning_rate: 0.01,
            momentum: 0.9,
            match_iou: 0.5,
            negative_ratio: Some(3),
            validation_fraction: 0.15,
            clip_norm: Some(10.0),
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        if !(self.match_iou > 0.0 && self.match_iou <= 1.0) {
            return Err(Error::config("match IoU must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation fraction must lie in [0, 1)"));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::config("gradient clip norm must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss before each step, then after the last one.
    pub losses: Vec<f64>,
    pub validation_loss: Option<f64>,
    pub train_count: usize,
    pub validation_count: usize,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.losses.first().copied().unwrap_or(f64::NAN)
    }

    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(f64::NAN)
    }
}

/// Per-default-box training targets for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    /// 0 = background, 1 = human.
    pub labels: Vec<usize>,
    /// Encoded offsets for positive boxes.
    pub offsets: Vec<Option<[f64; 4]>>,
}

impl Targets {
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| **l > 0).count()
    }
}

/// Matches ground-truth boxes (input pixels) to the model's default boxes.
pub fn build_targets(model: &CnnModel, boxes: &[BoundingBox], match_iou: f64) -> Targets {
    let side = model.input_side() as f64;
    let priors = model.default_boxes();
    let truths: Vec<CenterBox> = boxes.iter().map(|b| CenterBox::from_bbox(b, side)).collect();
    let assigned = match_priors(&priors, &truths, match_iou);
    let variances = model.architecture().priors.variances;
    let labels = assigned.iter().map(|a| usize::from(a.is_some())).collect();
    let offsets = assigned
        .iter()
        .zip(&priors)
        .map(|(a, p)| a.map(|t| encode(p, &truths[t], variances)))
        .collect();
    Targets { labels, offsets }
}

/// Loss value split into its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    /// Mean squared error between softmax scores and one-hot labels over
    /// the selected boxes.
    pub classification: f64,
    /// Smooth-L1 over positive-box offsets divided by the positive count.
    pub localization: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.classification + self.localization
    }
}

/// Loss and gradients with respect to logits and offsets.
pub fn detection_loss(out: &HeadOutput, targets: &Targets, negative_ratio: Option<usize>) -> (LossTerms, Vec<f64>, Vec<f64>) {
    let classes = out.classes;
    let probs = out.probabilities();
    let n = out.len();
    let box_err = |b: usize| -> f64 {
        (0..classes).map(|c| (probs[b * classes + c] - f64::from(u8::from(targets.labels[b] == c))).powi(2)).sum()
    };
    let positives: Vec<usize> = (0..n).filter(|b| targets.labels[*b] > 0).collect();
    let mut negatives: Vec<usize> = (0..n).filter(|b| targets.labels[*b] == 0).collect();
    if let Some(ratio) = negative_ratio {
        let keep = ratio * positives.len().max(1);
        let errs: Vec<f64> = (0..n).map(box_err).collect();
        negatives.sort_by(|a, b| errs[*b].total_cmp(&errs[*a]));
        negatives.truncate(keep);
    }
    let mut grad_logits = vec![0.0; out.logits.len()];
    let mut grad_offsets = vec![0.0; out.offsets.len()];
    let selected = positives.len() + negatives.len();
    let mut classification = 0.0;
    if selected > 0 {
        let denom = (selected * classes) as f64;
        for &b in positives.iter().chain(&negatives) {
            let p = &probs[b * classes..(b + 1) * classes];
            let mut gp = vec![0.0; classes];
            for c in 0..classes {
                let d = p[c] - f64::from(u8::from(targets.labels[b] == c));
                classification += d * d / denom;
                gp[c] = 2.0 * d / denom;
            }
            grad_logits[b * classes..(b + 1) * classes].copy_from_slice(&softmax_backward(p, &gp));
        }
    }
    let mut localization = 0.0;
    if !positives.is_empty() {
        let denom = positives.len() as f64;
        for &b in &positives {
            let t = targets.offsets[b].expect("positive box has offsets");
            for k in 0..4 {
                let (v, d) = smooth_l1(out.offsets[b * 4 + k] - t[k]);
                localization += v / denom;
                grad_offsets[b * 4 + k] = d / denom;
            }
        }
    }
    (LossTerms { classification, localization }, grad_logits, grad_offsets)
}

struct Prepared {
    input: Tensor,
    targets: Targets,
}

fn prepare(model: &CnnModel, samples: &[ToySample], match_iou: f64) -> Result<Vec<Prepared>> {
    let [c, side, _] = model.input_shape();
    samples
        .iter()
        .map(|s| {
            let input = image_to_tensor(&s.image, c, side)?;
            let sx = side as f64 / s.image.width() as f64;
            let sy = side as f64 / s.image.height() as f64;
            let boxes: Vec<BoundingBox> = s.boxes.iter().map(|b| b.scaled(sx, sy)).collect();
            Ok(Prepared { input, targets: build_targets(model, &boxes, match_iou) })
        })
        .collect()
}

fn mean_loss(model: &CnnModel, data: &[Prepared], ratio: Option<usize>) -> Result<f64> {
    let mut total = 0.0;
    for d in data {
        let out = model.forward(&d.input)?;
        total += detection_loss(&out, &d.targets, ratio).0.total();
    }
    Ok(total / data.len() as f64)
}

/// Full-batch SGD with momentum on the combined detection loss.
///
/// Batch-norm statistics are calibrated on the training images first and
/// then held fixed. Parameters stay `f32`-representable throughout.
pub fn train_toy(model: &mut CnnModel, dataset: &[ToySample], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let val_count = ((dataset.len() as f64) * cfg.validation_fraction).floor() as usize;
    let val_count = val_count.min(dataset.len() - 1);
    let (val_idx, train_idx) = order.split_at(val_count);
    let pick = |idx: &[usize]| -> Vec<ToySample> {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| dataset[i].clone()).collect()
    };
    let (train_set, val_set) = (pick(train_idx), pick(val_idx));

    let inputs: Vec<Tensor> = prepare(model, &train_set, cfg.match_iou)?.into_iter().map(|p| p.input).collect();
    model.calibrate_batchnorm(&inputs)?;
    model.round_parameters();
    let train = prepare(model, &train_set, cfg.match_iou)?;

    let mut velocity: Vec<Vec<f64>> = model.parameters().iter().map(|p| vec![0.0; p.len()]).collect();
    let mut losses = Vec::with_capacity(cfg.steps + 1);
    let scale = 1.0 / train.len() as f64;
    for _ in 0..cfg.steps {
        let mut grads: Vec<Vec<f64>> = velocity.iter().map(|v| vec![0.0; v.len()]).collect();
        let mut loss = 0.0;
        for d in &train {
            let trace = model.forward_trace(&d.input)?;
            let (terms, gl, go) = detection_loss(&trace.output, &d.targets, cfg.negative_ratio);
            loss += terms.total() * scale;
            for (acc, g) in grads.iter_mut().zip(model.backward(&trace, &gl, &go)?) {
                acc.iter_mut().zip(g).for_each(|(a, b)| *a += b * scale);
            }
        }
        losses.push(loss);
        let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
        let clip = match cfg.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        for ((p, v), g) in model.parameters_mut().into_iter().zip(&mut velocity).zip(&grads) {
            for ((pi, vi), gi) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                *vi = cfg.momentum * *vi - cfg.learning_rate * gi * clip;
                *pi = (*pi + *vi) as f32 as f64;
            }
        }
    }
    losses.push(mean_loss(model, &train, cfg.negative_ratio)?);
    let validation_loss = if val_set.is_empty() {
        None
    } else {
        Some(mean_loss(model, &prepare(model, &val_set, cfg.match_iou)?, cfg.negative_ratio)?)
    };
    Ok(TrainReport { losses, validation_loss, train_count: train.len(), validation_count: val_set.len() })
}
