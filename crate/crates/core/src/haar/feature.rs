use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{BoundingBox, IntegralImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HaarKind {
    TwoRect,
    ThreeRect,
    FourRect,
}

impl HaarKind {
    pub fn rect_count(self) -> usize {
        match self {
            HaarKind::TwoRect => 2,
            HaarKind::ThreeRect => 3,
            HaarKind::FourRect => 4,
        }
    }
}

/// Rectangle relative to the detection window. Weight `+1` marks a white
/// region, `-1` a black one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub weight: i8,
}

/// White-minus-black rectangle feature over a `window_w × window_h` window.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarFeature {
    kind: HaarKind,
    rects: Vec<WeightedRect>,
    window_w: u32,
    window_h: u32,
}

impl HaarFeature {
    pub fn new(kind: HaarKind, rects: Vec<WeightedRect>, window_w: u32, window_h: u32) -> Result<Self> {
        if rects.len() != kind.rect_count() {
            return Err(Error::input(format!(
                "{kind:?} feature needs {} rects, got {}",
                kind.rect_count(),
                rects.len()
            )));
        }
        for r in &rects {
            if r.weight != 1 && r.weight != -1 {
                return Err(Error::input(format!("rect weight must be ±1, got {}", r.weight)));
            }
            if r.w == 0 || r.h == 0 || r.x + r.w > window_w || r.y + r.h > window_h {
                return Err(Error::bounds(format!("rect {r:?} outside {window_w}x{window_h} window")));
            }
        }
        Ok(Self { kind, rects, window_w, window_h })
    }

    /// Left half white, right half black: responds to vertical edges.
    pub fn two_rect_vertical(x: u32, y: u32, half_w: u32, h: u32, window_w: u32, window_h: u32) -> Result<Self> {
        Self::new(
            HaarKind::TwoRect,
            vec![
                WeightedRect { x, y, w: half_w, h, weight: 1 },
                WeightedRect { x: x + half_w, y, w: half_w, h, weight: -1 },
            ],
            window_w,
            window_h,
        )
    }

    /// Top half white, bottom half black.
    pub fn two_rect_horizontal(x: u32, y: u32, w: u32, half_h: u32, window_w: u32, window_h: u32) -> Result<Self> {
        Self::new(
            HaarKind::TwoRect,
            vec![
                WeightedRect { x, y, w, h: half_h, weight: 1 },
                WeightedRect { x, y: y + half_h, w, h: half_h, weight: -1 },
            ],
            window_w,
            window_h,
        )
    }

    /// White | black (double width) | white, columns.
    pub fn three_rect_vertical(x: u32, y: u32, unit_w: u32, h: u32, window_w: u32, window_h: u32) -> Result<Self> {
        Self::new(
            HaarKind::ThreeRect,
            vec![
                WeightedRect { x, y, w: unit_w, h, weight: 1 },
                WeightedRect { x: x + unit_w, y, w: 2 * unit_w, h, weight: -1 },
                WeightedRect { x: x + 3 * unit_w, y, w: unit_w, h, weight: 1 },
            ],
            window_w,
            window_h,
        )
    }

    /// White / black (double height) / white, rows.
    pub fn three_rect_horizontal(x: u32, y: u32, w: u32, unit_h: u32, window_w: u32, window_h: u32) -> Result<Self> {
        Self::new(
            HaarKind::ThreeRect,
            vec![
                WeightedRect { x, y, w, h: unit_h, weight: 1 },
                WeightedRect { x, y: y + unit_h, w, h: 2 * unit_h, weight: -1 },
                WeightedRect { x, y: y + 3 * unit_h, w, h: unit_h, weight: 1 },
            ],
            window_w,
            window_h,
        )
    }

    /// 2×2 checkerboard, white on the main diagonal.
    pub fn four_rect(x: u32, y: u32, half_w: u32, half_h: u32, window_w: u32, window_h: u32) -> Result<Self> {
        Self::new(
            HaarKind::FourRect,
            vec![
                WeightedRect { x, y, w: half_w, h: half_h, weight: 1 },
                WeightedRect { x: x + half_w, y, w: half_w, h: half_h, weight: -1 },
                WeightedRect { x, y: y + half_h, w: half_w, h: half_h, weight: -1 },
                WeightedRect { x: x + half_w, y: y + half_h, w: half_w, h: half_h, weight: 1 },
            ],
            window_w,
            window_h,
        )
    }

    pub fn kind(&self) -> HaarKind {
        self.kind
    }

    pub fn rects(&self) -> &[WeightedRect] {
        &self.rects
    }

    pub fn window(&self) -> (u32, u32) {
        (self.window_w, self.window_h)
    }

    /// Σ weight × area; zero means uniform input gives zero response.
    pub fn weighted_area(&self) -> i64 {
        self.rects.iter().map(|r| r.weight as i64 * r.w as i64 * r.h as i64).sum()
    }

    /// Unscaled response with the window origin at `(x, y)`, normalised by
    /// window area. Caller guarantees the window lies inside `ii`.
    #[inline]
    pub fn response_at(&self, ii: &IntegralImage, x: usize, y: usize) -> f64 {
        let mut acc = 0.0;
        for r in &self.rects {
            acc += r.weight as f64 * ii.sum_unchecked(x + r.x as usize, y + r.y as usize, r.w as usize, r.h as usize);
        }
        acc / (self.window_w as f64 * self.window_h as f64)
    }
}

/// Feature response inside `window`, with rects scaled by `scale` and the
/// sum normalised by the window's area.
pub fn eval_feature(f: &HaarFeature, ii: &IntegralImage, window: &BoundingBox, scale: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::config(format!("feature scale must be positive, got {scale}")));
    }
    let (wx, wy) = (window.x.round(), window.y.round());
    let (ww, wh) = (window.w.round(), window.h.round());
    if wx < 0.0 || wy < 0.0 || ww <= 0.0 || wh <= 0.0 || wx + ww > ii.width() as f64 || wy + wh > ii.height() as f64 {
        return Err(Error::bounds(format!(
            "window {window:?} outside {}x{} image",
            ii.width(),
            ii.height()
        )));
    }
    let mut acc = 0.0;
    for r in &f.rects {
        let rx = (r.x as f64 * scale).round();
        let ry = (r.y as f64 * scale).round();
        let rw = (r.w as f64 * scale).round().max(1.0);
        let rh = (r.h as f64 * scale).round().max(1.0);
        if rx + rw > ww || ry + rh > wh {
            return Err(Error::bounds(format!("scaled rect {r:?} exceeds window {window:?}")));
        }
        acc += r.weight as f64 * ii.sum((wx + rx) as usize, (wy + ry) as usize, rw as usize, rh as usize)?;
    }
    Ok(acc / (ww * wh))
}

/// All balanced two/three/four-rect features on a `window_w × window_h`
/// grid whose positions and sizes step by `stride` pixels.
pub fn generate_candidates(window_w: u32, window_h: u32, stride: u32) -> Vec<HaarFeature> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    // (split_x, split_y, builder): total region must divide evenly into parts
    type Builder = fn(u32, u32, u32, u32, u32, u32) -> Result<HaarFeature>;
    let shapes: [(u32, u32, Builder); 5] = [
        (2, 1, |x, y, w, h, ww, wh| HaarFeature::two_rect_vertical(x, y, w / 2, h, ww, wh)),
        (1, 2, |x, y, w, h, ww, wh| HaarFeature::two_rect_horizontal(x, y, w, h / 2, ww, wh)),
        (4, 1, |x, y, w, h, ww, wh| HaarFeature::three_rect_vertical(x, y, w / 4, h, ww, wh)),
        (1, 4, |x, y, w, h, ww, wh| HaarFeature::three_rect_horizontal(x, y, w, h / 4, ww, wh)),
        (2, 2, |x, y, w, h, ww, wh| HaarFeature::four_rect(x, y, w / 2, h / 2, ww, wh)),
    ];
    for (px, py, build) in shapes {
        let mut w = stride;
        while w <= window_w {
            let mut h = stride;
            while h <= window_h {
                if w % px == 0 && h % py == 0 {
                    let mut y = 0;
                    while y + h <= window_h {
                        let mut x = 0;
                        while x + w <= window_w {
                            if let Ok(f) = build(x, y, w, h, window_w, window_h) {
                                out.push(f);
                            }
                            x += stride;
                        }
                        y += stride;
                    }
                }
                h += stride;
            }
            w += stride;
        }
    }
    out
}
