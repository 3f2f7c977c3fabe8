use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{nms, BoundingBox, Detection};

fn f32_exact(v: f64) -> f64 {
    v as f32 as f64
}

/// Default-box layout shared by every tap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub aspect_ratios: Vec<f64>,
    /// Scale of the first tap as a fraction of the input side.
    pub min_scale: f64,
    /// Scale of the last tap.
    pub max_scale: f64,
    /// Center and size variances used by the offset encoding.
    pub variances: [f64; 2],
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self::new(vec![1.0, 2.0, 0.5, 3.0, 1.0 / 3.0], 0.2, 0.9, [0.1, 0.2])
    }
}

impl PriorConfig {
    /// Values are rounded to `f32` so they survive the binary model format.
    pub fn new(aspect_ratios: Vec<f64>, min_scale: f64, max_scale: f64, variances: [f64; 2]) -> Self {
        Self {
            aspect_ratios: aspect_ratios.into_iter().map(f32_exact).collect(),
            min_scale: f32_exact(min_scale),
            max_scale: f32_exact(max_scale),
            variances: [f32_exact(variances[0]), f32_exact(variances[1])],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.aspect_ratios.is_empty() || !self.aspect_ratios.iter().all(|a| positive(*a)) {
            return Err(Error::shape("aspect ratios must be positive"));
        }
        if !(positive(self.min_scale) && positive(self.max_scale) && self.min_scale <= self.max_scale) {
            return Err(Error::shape("prior scales must satisfy 0 < min <= max"));
        }
        if !self.variances.iter().all(|v| positive(*v)) {
            return Err(Error::shape("variances must be positive"));
        }
        Ok(())
    }

    /// Scale of tap `k` out of `taps`, linear between min and max.
    pub fn scale(&self, k: usize, taps: usize) -> f64 {
        if taps <= 1 {
            self.min_scale
        } else {
            self.min_scale + (self.max_scale - self.min_scale) * k as f64 / (taps - 1) as f64
        }
    }
}

/// Box in center-size form, normalized to the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl CenterBox {
    pub fn from_bbox(b: &BoundingBox, side: f64) -> Self {
        Self { cx: (b.x + b.w / 2.0) / side, cy: (b.y + b.h / 2.0) / side, w: b.w / side, h: b.h / side }
    }

    /// Corner box scaled by `side`, clamped to `[0, side]²`.
    pub fn to_bbox(&self, side: f64) -> BoundingBox {
        let c = |v: f64| v.clamp(0.0, 1.0) * side;
        BoundingBox::from_corners(
            c(self.cx - self.w / 2.0),
            c(self.cy - self.h / 2.0),
            c(self.cx + self.w / 2.0),
            c(self.cy + self.h / 2.0),
        )
    }

    pub fn iou(&self, other: &CenterBox) -> f64 {
        let a = BoundingBox::new(self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.w, self.h);
        let b = BoundingBox::new(other.cx - other.w / 2.0, other.cy - other.h / 2.0, other.w, other.h);
        a.iou(&b)
    }
}

/// Default boxes for taps with the given map sides, ordered by tap, row,
/// column, aspect ratio.
pub fn default_boxes(map_sides: &[usize], cfg: &PriorConfig) -> Vec<CenterBox> {
    let mut out = Vec::new();
    for (k, &f) in map_sides.iter().enumerate() {
        let s = cfg.scale(k, map_sides.len());
        for y in 0..f {
            for x in 0..f {
                for &a in &cfg.aspect_ratios {
                    let r = a.sqrt();
                    out.push(CenterBox {
                        cx: (x as f64 + 0.5) / f as f64,
                        cy: (y as f64 + 0.5) / f as f64,
                        w: s * r,
                        h: s / r,
                    });
                }
            }
        }
    }
    out
}

/// Applies regression offsets `(dx, dy, dw, dh)` to a default box.
pub fn decode(prior: &CenterBox, offsets: &[f64], variances: [f64; 2]) -> CenterBox {
    CenterBox {
        cx: prior.cx + offsets[0] * variances[0] * prior.w,
        cy: prior.cy + offsets[1] * variances[0] * prior.h,
        w: prior.w * (offsets[2] * variances[1]).exp(),
        h: prior.h * (offsets[3] * variances[1]).exp(),
    }
}

/// Inverse of [`decode`].
pub fn encode(prior: &CenterBox, target: &CenterBox, variances: [f64; 2]) -> [f64; 4] {
    [
        (target.cx - prior.cx) / (prior.w * variances[0]),
        (target.cy - prior.cy) / (prior.h * variances[0]),
        (target.w / prior.w).ln() / variances[1],
        (target.h / prior.h).ln() / variances[1],
    ]
}

/// Ground-truth index assigned to each default box, if any.
///
/// A box is positive when its IoU with some ground truth reaches
/// `threshold`; in addition each ground truth claims its best-overlapping
/// box so that small objects always get at least one positive.
pub fn match_priors(priors: &[CenterBox], truths: &[CenterBox], threshold: f64) -> Vec<Option<usize>> {
    let mut assigned = vec![None; priors.len()];
    let mut best_iou = vec![0.0f64; priors.len()];
    for (p, prior) in priors.iter().enumerate() {
        for (t, truth) in truths.iter().enumerate() {
            let iou = prior.iou(truth);
            if iou >= threshold && iou > best_iou[p] {
                best_iou[p] = iou;
                assigned[p] = Some(t);
            }
        }
    }
    for (t, truth) in truths.iter().enumerate() {
        let best = priors
            .iter()
            .enumerate()
            .map(|(p, prior)| (p, prior.iou(truth)))
            .fold(None, |acc: Option<(usize, f64)>, (p, iou)| match acc {
                Some((_, b)) if b >= iou => acc,
                _ => Some((p, iou)),
            });
        if let Some((p, iou)) = best {
            if iou > 0.0 {
                assigned[p] = Some(t);
            }
        }
    }
    assigned
}

/// Thresholding and NMS over per-box human scores and decoded boxes (in
/// input pixels).
pub fn select_detections(boxes: Vec<BoundingBox>, scores: &[f64], conf_threshold: f64, nms_iou: f64) -> Vec<Detection> {
    let dets = boxes
        .into_iter()
        .zip(scores)
        .filter(|(b, s)| **s >= conf_threshold && b.w > 0.0 && b.h > 0.0)
        .map(|(b, s)| Detection::new(b, "person", *s))
        .collect();
    nms(dets, nms_iou)
}
