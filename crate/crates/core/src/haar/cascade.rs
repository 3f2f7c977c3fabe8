use super::adaboost::{adaboost_train, LabeledWindow, WeakLearner};
use super::feature::HaarFeature;
use crate::error::{Error, Result};
use crate::imagecore::{build_pyramid, integral, nms, to_grayscale, BoundingBox, Detection, Image, IntegralImage};

/// Boosted stage: passes when Σ α_t h_t ≥ `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub learners: Vec<WeakLearner>,
    pub threshold: f64,
}

impl Stage {
    #[inline]
    pub fn score_at(&self, ii: &IntegralImage, x: usize, y: usize) -> f64 {
        self.learners.iter().map(|l| l.alpha * l.vote_at(ii, x, y) as f64).sum()
    }
}

/// Ordered boosted stages over a fixed base window.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub window_w: u32,
    pub window_h: u32,
    pub stages: Vec<Stage>,
}

impl CascadeModel {
    pub fn new(window_w: u32, window_h: u32, stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() || stages.iter().any(|s| s.learners.is_empty()) {
            return Err(Error::input("cascade needs at least one stage and one learner per stage"));
        }
        for s in &stages {
            for l in &s.learners {
                if l.feature.window() != (window_w, window_h) {
                    return Err(Error::input("learner feature window differs from cascade window"));
                }
                if !l.alpha.is_finite() || !l.threshold.is_finite() || (l.polarity != 1 && l.polarity != -1) {
                    return Err(Error::input("learner has non-finite alpha/threshold or bad polarity"));
                }
            }
        }
        Ok(Self { window_w, window_h, stages })
    }

    pub fn learner_count(&self) -> usize {
        self.stages.iter().map(|s| s.learners.len()).sum()
    }

    /// Final-stage margin if the window at `(x, y)` passes every stage.
    pub fn classify_at(&self, ii: &IntegralImage, x: usize, y: usize) -> Option<f64> {
        let mut margin = 0.0;
        for stage in &self.stages {
            margin = stage.score_at(ii, x, y) - stage.threshold;
            if margin < 0.0 {
                return None;
            }
        }
        Some(margin)
    }
}

/// Cascade training schedule. `rounds_per_stage[k]` learners go in stage
/// `k`; stage thresholds default to 0.
#[derive(Debug, Clone)]
pub struct CascadeTrainConfig {
    pub rounds_per_stage: Vec<usize>,
    pub stage_thresholds: Option<Vec<f64>>,
}

impl Default for CascadeTrainConfig {
    fn default() -> Self {
        Self { rounds_per_stage: vec![10], stage_thresholds: None }
    }
}

/// Trains an attentional cascade on window-sized positive and negative
/// crops. Later stages only see negatives that survived earlier stages;
/// training stops early once no negatives remain.
pub fn train_cascade(
    positives: &[Image],
    negatives: &[Image],
    candidates: &[HaarFeature],
    cfg: &CascadeTrainConfig,
) -> Result<CascadeModel> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::input("cascade training needs both positive and negative windows"));
    }
    if cfg.rounds_per_stage.is_empty() || cfg.rounds_per_stage.contains(&0) {
        return Err(Error::config("every stage needs at least one boosting round"));
    }
    if let Some(t) = &cfg.stage_thresholds {
        if t.len() != cfg.rounds_per_stage.len() {
            return Err(Error::config("stage_thresholds length must match rounds_per_stage"));
        }
    }
    let (ww, wh) = candidates.first().ok_or_else(|| Error::input("no candidate features"))?.window();
    let to_window = |img: &Image, label: i8| -> Result<LabeledWindow> {
        if img.width() != ww as usize || img.height() != wh as usize {
            return Err(Error::input(format!(
                "training window is {}x{}, expected {ww}x{wh}",
                img.width(),
                img.height()
            )));
        }
        LabeledWindow::from_image(img, label)
    };
    let pos: Vec<LabeledWindow> = positives.iter().map(|p| to_window(p, 1)).collect::<Result<_>>()?;
    let mut neg: Vec<LabeledWindow> = negatives.iter().map(|n| to_window(n, -1)).collect::<Result<_>>()?;

    let mut stages: Vec<Stage> = Vec::new();
    for (k, &rounds) in cfg.rounds_per_stage.iter().enumerate() {
        if neg.is_empty() {
            break;
        }
        let mut samples = pos.clone();
        samples.extend(neg.iter().cloned());
        let learners = adaboost_train(&samples, rounds, candidates)?;
        let threshold = cfg.stage_thresholds.as_ref().map_or(0.0, |t| t[k]);
        let stage = Stage { learners, threshold };
        neg.retain(|s| stage.score_at(&s.ii, 0, 0) >= stage.threshold);
        stages.push(stage);
    }
    CascadeModel::new(ww, wh, stages)
}

/// Sliding-window parameters shared by the window-based detectors.
#[derive(Debug, Clone, Copy)]
pub struct DetectParams {
    pub step: usize,
    pub scale_factor: f64,
    pub nms_iou: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self { step: 4, scale_factor: 1.25, nms_iou: 0.3 }
    }
}

/// Runs the cascade over every pyramid level and window position.
pub fn cascade_detect(model: &CascadeModel, img: &Image, params: &DetectParams) -> Result<Vec<Detection>> {
    Ok(cascade_detect_counted(model, img, params)?.0)
}

/// Like [`cascade_detect`], also returning the number of windows evaluated.
pub fn cascade_detect_counted(
    model: &CascadeModel,
    img: &Image,
    params: &DetectParams,
) -> Result<(Vec<Detection>, usize)> {
    if params.step == 0 {
        return Err(Error::config("window step must be positive"));
    }
    let gray = to_grayscale(img);
    let (ww, wh) = (model.window_w as usize, model.window_h as usize);
    let min_side = ww.max(wh).max(8);
    let levels = build_pyramid(&gray, params.scale_factor, min_side)?;
    let (img_w, img_h) = (img.width() as f64, img.height() as f64);
    let mut raw = Vec::new();
    let mut evaluated = 0usize;
    for level in &levels {
        let (lw, lh) = (level.image.width(), level.image.height());
        if lw < ww || lh < wh {
            continue;
        }
        let ii = integral(&level.image)?;
        for y in (0..=lh - wh).step_by(params.step) {
            for x in (0..=lw - ww).step_by(params.step) {
                evaluated += 1;
                if let Some(margin) = model.classify_at(&ii, x, y) {
                    let b = BoundingBox::new(x as f64, y as f64, ww as f64, wh as f64)
                        .scaled(level.scale, level.scale_y);
                    if let Some(b) = b.clamp_to(img_w, img_h) {
                        raw.push(Detection::new(b, "person", margin));
                    }
                }
            }
        }
    }
    Ok((nms(raw, params.nms_iou), evaluated))
}
