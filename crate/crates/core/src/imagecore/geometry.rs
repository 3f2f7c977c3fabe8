use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixel units; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x: x0, y: y0, w: x1 - x0, h: y1 - y0 }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.x.is_finite() && self.y.is_finite()
    }

    pub fn intersection(&self, other: &BoundingBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Clips to `[0, width] × [0, height]`; `None` if nothing remains.
    pub fn clamp_to(&self, width: f64, height: f64) -> Option<BoundingBox> {
        let x0 = self.x.clamp(0.0, width);
        let y0 = self.y.clamp(0.0, height);
        let x1 = self.right().clamp(0.0, width);
        let y1 = self.bottom().clamp(0.0, height);
        let b = BoundingBox::from_corners(x0, y0, x1, y1);
        b.is_valid().then_some(b)
    }

    pub fn scaled(&self, sx: f64, sy: f64) -> BoundingBox {
        BoundingBox::new(self.x * sx, self.y * sy, self.w * sx, self.h * sy)
    }
}

/// A labelled, scored box emitted by any detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub label: String,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: BoundingBox, label: impl Into<String>, score: f64) -> Self {
        Self { bbox, label: label.into(), score }
    }
}

fn suppress_by(mut dets: Vec<Detection>, iou_threshold: f64, key: impl Fn(&Detection) -> f64) -> Vec<Detection> {
    // stable sort keeps input order among equal keys
    dets.sort_by(|a, b| key(b).total_cmp(&key(a)));
    let mut kept: Vec<Detection> = Vec::with_capacity(dets.len());
    for d in dets {
        if kept.iter().all(|k| k.bbox.iou(&d.bbox) <= iou_threshold) {
            kept.push(d);
        }
    }
    kept
}

/// Greedy non-maximum suppression: highest score wins each cluster of boxes
/// overlapping by more than `iou_threshold`.
pub fn nms(dets: Vec<Detection>, iou_threshold: f64) -> Vec<Detection> {
    suppress_by(dets, iou_threshold, |d| d.score)
}

/// Keeps the largest-area box of each overlapping cluster.
pub fn merge_biggest_box(dets: Vec<Detection>, iou_threshold: f64) -> Vec<Detection> {
    suppress_by(dets, iou_threshold, |d| d.bbox.area())
}
