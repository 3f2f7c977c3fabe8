use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::imagecore::{BoundingBox, Detection, GroundTruth};

pub const DEFAULT_MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, o: MatchCounts) -> MatchCounts {
        MatchCounts { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_ }
    }
}

impl AddAssign for MatchCounts {
    fn add_assign(&mut self, o: MatchCounts) {
        *self = *self + o;
    }
}

/// Greedy matching in descending score order (ties keep input order).
///
/// Each prediction takes the unmatched ground-truth box it overlaps most;
/// it is a true positive if that overlap reaches `iou_threshold`.
pub fn match_detections(preds: &[Detection], gt: &[BoundingBox], iou_threshold: f64) -> MatchCounts {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|a, b| preds[*b].score.total_cmp(&preds[*a].score));
    let mut taken = vec![false; gt.len()];
    let mut tp = 0;
    for i in order {
        let best = gt
            .iter()
            .enumerate()
            .filter(|(g, _)| !taken[*g])
            .map(|(g, b)| (g, preds[i].bbox.iou(b)))
            .fold(None, |acc: Option<(usize, f64)>, (g, iou)| match acc {
                Some((_, v)) if v >= iou => acc,
                _ => Some((g, iou)),
            });
        if let Some((g, iou)) = best {
            if iou >= iou_threshold {
                taken[g] = true;
                tp += 1;
            }
        }
    }
    MatchCounts { tp, fp: preds.len() - tp, fn_: gt.len() - tp }
}

/// Per-object counts summed over every image appearing in either map.
/// Classes are not compared: every detector here has a single class.
pub fn evaluate_dataset(preds: &BTreeMap<String, Vec<Detection>>, gt: &GroundTruth, iou_threshold: f64) -> MatchCounts {
    let mut total = MatchCounts::default();
    let empty_preds = Vec::new();
    let ids: std::collections::BTreeSet<&String> = preds.keys().chain(gt.keys()).collect();
    for id in ids {
        let p = preds.get(id).unwrap_or(&empty_preds);
        let g: Vec<BoundingBox> = gt.get(id).map(|v| v.iter().map(|(b, _)| *b).collect()).unwrap_or_default();
        total += match_detections(p, &g, iou_threshold);
    }
    total
}

/// Error rates in percent; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    /// Share of emitted detections that are false: `fp / (tp + fp)`.
    pub fpr: Option<f64>,
    /// Share of ground-truth objects missed: `fn / (tp + fn)`.
    pub fnr: Option<f64>,
}

pub fn rates(c: &MatchCounts) -> Rates {
    let pct = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64 * 100.0);
    Rates { fpr: pct(c.fp, c.tp + c.fp), fnr: pct(c.fn_, c.tp + c.fn_) }
}
