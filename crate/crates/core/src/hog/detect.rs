use super::descriptor::descriptor_from_field;
use super::gradient::compute_gradients;
use super::svm::{svm_score, HogSvmModel};
use crate::error::{Error, Result};
use crate::imagecore::{build_pyramid, merge_biggest_box, nms, BoundingBox, Detection, Image};

/// How overlapping window hits are collapsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeRule {
    /// keep the largest box of each cluster
    BiggestBox,
    /// keep the highest-scoring box of each cluster
    #[default]
    Nms,
}

#[derive(Debug, Clone, Copy)]
pub struct HogDetectParams {
    pub step: usize,
    pub scale_factor: f64,
    pub merge: MergeRule,
    pub merge_iou: f64,
    pub score_threshold: f64,
}

impl Default for HogDetectParams {
    fn default() -> Self {
        Self { step: 8, scale_factor: 1.2, merge: MergeRule::Nms, merge_iou: 0.3, score_threshold: 0.0 }
    }
}

/// Unmerged window hits (score above threshold) in original coordinates.
pub(crate) fn raw_hits(model: &HogSvmModel, img: &Image, params: &HogDetectParams) -> Result<Vec<Detection>> {
    if params.step == 0 {
        return Err(Error::config("window step must be positive"));
    }
    let cfg = &model.config;
    let (ww, wh) = (cfg.window_w, cfg.window_h);
    let levels = build_pyramid(img, params.scale_factor, ww.min(wh).max(8))?;
    let (img_w, img_h) = (img.width() as f64, img.height() as f64);
    let mut hits = Vec::new();
    for level in &levels {
        let (lw, lh) = (level.image.width(), level.image.height());
        if lw < ww || lh < wh {
            continue;
        }
        let field = compute_gradients(&level.image);
        for y in (0..=lh - wh).step_by(params.step) {
            for x in (0..=lw - ww).step_by(params.step) {
                let d = descriptor_from_field(&field, x, y, cfg);
                let score = svm_score(model, d.as_slice())?;
                if score > params.score_threshold {
                    let b = BoundingBox::new(x as f64, y as f64, ww as f64, wh as f64)
                        .scaled(level.scale, level.scale_y);
                    if let Some(b) = b.clamp_to(img_w, img_h) {
                        hits.push(Detection::new(b, "person", score));
                    }
                }
            }
        }
    }
    Ok(hits)
}

/// Sliding-window SVM detection over an image pyramid followed by the
/// chosen duplicate-merging rule.
pub fn detect_multiscale(model: &HogSvmModel, img: &Image, params: &HogDetectParams) -> Result<Vec<Detection>> {
    let hits = raw_hits(model, img, params)?;
    Ok(match params.merge {
        MergeRule::BiggestBox => merge_biggest_box(hits, params.merge_iou),
        MergeRule::Nms => nms(hits, params.merge_iou),
    })
}
