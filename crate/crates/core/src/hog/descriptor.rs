use serde::{Deserialize, Serialize};

use super::gradient::{compute_gradients, GradientField};
use crate::error::{Error, Result};
use crate::imagecore::{BoundingBox, Image};

/// Orientation bins of 20° over the unsigned half-turn.
pub const BINS: usize = 9;
const BIN_WIDTH: f64 = 180.0 / BINS as f64;
const BLOCK_EPS: f64 = 1e-5;
const HYS_CLIP: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HogConfig {
    /// pixels per cell side
    pub cell_size: usize,
    /// cells per block side
    pub block_size: usize,
    /// block step in cells
    pub block_stride: usize,
    pub bins: usize,
    pub window_w: usize,
    pub window_h: usize,
}

impl Default for HogConfig {
    fn default() -> Self {
        Self { cell_size: 8, block_size: 2, block_stride: 1, bins: BINS, window_w: 64, window_h: 128 }
    }
}

impl HogConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins != BINS {
            return Err(Error::config(format!("HOG uses {BINS} bins, got {}", self.bins)));
        }
        if self.cell_size == 0 || self.block_size == 0 || self.block_stride == 0 {
            return Err(Error::config("cell, block and stride sizes must be positive"));
        }
        if self.window_w % self.cell_size != 0 || self.window_h % self.cell_size != 0 {
            return Err(Error::config(format!(
                "window {}x{} not divisible by cell size {}",
                self.window_w, self.window_h, self.cell_size
            )));
        }
        let (cx, cy) = self.cells();
        if cx < self.block_size || cy < self.block_size {
            return Err(Error::config("window smaller than one block"));
        }
        if (cx - self.block_size) % self.block_stride != 0 || (cy - self.block_size) % self.block_stride != 0 {
            return Err(Error::config("block stride does not tile the cell grid"));
        }
        Ok(())
    }

    pub fn cells(&self) -> (usize, usize) {
        (self.window_w / self.cell_size, self.window_h / self.cell_size)
    }

    pub fn blocks(&self) -> (usize, usize) {
        let (cx, cy) = self.cells();
        ((cx - self.block_size) / self.block_stride + 1, (cy - self.block_size) / self.block_stride + 1)
    }

    pub fn descriptor_len(&self) -> usize {
        let (bx, by) = self.blocks();
        bx * by * self.block_size * self.block_size * self.bins
    }
}

/// Block-normalised concatenation of cell histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor(pub Vec<f64>);

impl HogDescriptor {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Orientation histogram of one cell. Each pixel's magnitude is split
/// linearly between the two nearest bin centres (10°, 30°, …, 170°),
/// wrapping across the 0°/180° seam.
pub fn cell_histogram(field: &GradientField, cell: &BoundingBox) -> Result<[f64; BINS]> {
    let (x0, y0, w, h) = (cell.x.round(), cell.y.round(), cell.w.round(), cell.h.round());
    if x0 < 0.0 || y0 < 0.0 || w <= 0.0 || h <= 0.0 || x0 + w > field.width as f64 || y0 + h > field.height as f64 {
        return Err(Error::bounds(format!("cell {cell:?} outside {}x{} field", field.width, field.height)));
    }
    let mut hist = [0.0; BINS];
    accumulate_cell(field, x0 as usize, y0 as usize, w as usize, h as usize, &mut hist);
    Ok(hist)
}

fn accumulate_cell(field: &GradientField, x0: usize, y0: usize, w: usize, h: usize, hist: &mut [f64; BINS]) {
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            let (m, a) = field.at(x, y);
            if m == 0.0 {
                continue;
            }
            let pos = (a - BIN_WIDTH / 2.0) / BIN_WIDTH;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo_bin = (lo as i64).rem_euclid(BINS as i64) as usize;
            let hi_bin = (lo_bin + 1) % BINS;
            hist[lo_bin] += m * (1.0 - frac);
            hist[hi_bin] += m * frac;
        }
    }
}

/// L2-Hys: L2-normalise with ε, clip at 0.2, renormalise.
pub fn block_normalize(block: &mut [f64]) {
    let norm = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() + BLOCK_EPS * BLOCK_EPS).sqrt();
    let n = norm(block);
    for v in block.iter_mut() {
        *v = (*v / n).min(HYS_CLIP);
    }
    let n = norm(block);
    for v in block.iter_mut() {
        *v /= n;
    }
}

/// Descriptor of the window at `(x0, y0)` of a precomputed gradient field.
pub(crate) fn descriptor_from_field(field: &GradientField, x0: usize, y0: usize, cfg: &HogConfig) -> HogDescriptor {
    let (cx, cy) = cfg.cells();
    let mut cells = vec![[0.0; BINS]; cx * cy];
    for j in 0..cy {
        for i in 0..cx {
            accumulate_cell(
                field,
                x0 + i * cfg.cell_size,
                y0 + j * cfg.cell_size,
                cfg.cell_size,
                cfg.cell_size,
                &mut cells[j * cx + i],
            );
        }
    }
    let (bx, by) = cfg.blocks();
    let block_len = cfg.block_size * cfg.block_size * BINS;
    let mut out = Vec::with_capacity(cfg.descriptor_len());
    for bj in 0..by {
        for bi in 0..bx {
            let start = out.len();
            for dj in 0..cfg.block_size {
                for di in 0..cfg.block_size {
                    let ci = bi * cfg.block_stride + di;
                    let cj = bj * cfg.block_stride + dj;
                    out.extend_from_slice(&cells[cj * cx + ci]);
                }
            }
            block_normalize(&mut out[start..start + block_len]);
        }
    }
    HogDescriptor(out)
}

/// HOG descriptor of a window whose size equals the configured window.
pub fn hog_descriptor(window: &Image, cfg: &HogConfig) -> Result<HogDescriptor> {
    cfg.validate()?;
    if window.width() != cfg.window_w || window.height() != cfg.window_h {
        return Err(Error::config(format!(
            "window is {}x{}, config expects {}x{}",
            window.width(),
            window.height(),
            cfg.window_w,
            cfg.window_h
        )));
    }
    let field = compute_gradients(window);
    Ok(descriptor_from_field(&field, 0, 0, cfg))
}
