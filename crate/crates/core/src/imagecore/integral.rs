use super::{BoundingBox, Image};
use crate::error::{Error, Result};

/// Summed-area table with a zero top row and left column.
///
/// Entry `(x, y)` holds the sum of all pixels in `[0, x) × [0, y)`, so the
/// table is `(width + 1) × (height + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

/// Builds the summed-area table of a single-channel image.
pub fn integral(img: &Image) -> Result<IntegralImage> {
    if img.channels() != 1 {
        return Err(Error::Channel(format!(
            "integral image needs 1 channel, got {}",
            img.channels()
        )));
    }
    let (w, h) = (img.width(), img.height());
    let stride = w + 1;
    let mut table = vec![0.0; stride * (h + 1)];
    let px = img.pixels();
    for y in 0..h {
        let mut row_sum = 0.0;
        for x in 0..w {
            row_sum += px[y * w + x];
            table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row_sum;
        }
    }
    Ok(IntegralImage { width: w, height: h, table })
}

impl IntegralImage {
    /// Width of the source image.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Table entry; `x ∈ [0, width]`, `y ∈ [0, height]`.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.table[y * (self.width + 1) + x]
    }

    /// Sum over the `w`×`h` rectangle at `(x, y)` without bounds checks
    /// beyond the slice indexing.
    #[inline]
    pub fn sum_unchecked(&self, x: usize, y: usize, w: usize, h: usize) -> f64 {
        self.at(x + w, y + h) - self.at(x, y + h) - self.at(x + w, y) + self.at(x, y)
    }

    pub fn sum(&self, x: usize, y: usize, w: usize, h: usize) -> Result<f64> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::bounds(format!(
                "rect {w}x{h}+{x}+{y} outside {}x{} integral image",
                self.width, self.height
            )));
        }
        Ok(self.sum_unchecked(x, y, w, h))
    }

    /// Pixel sum over a pixel-aligned box (coordinates are rounded).
    pub fn rect_sum(&self, bbox: &BoundingBox) -> Result<f64> {
        let (x, y, w, h) = (bbox.x.round(), bbox.y.round(), bbox.w.round(), bbox.h.round());
        if x < 0.0 || y < 0.0 || w <= 0.0 || h <= 0.0 {
            return Err(Error::bounds(format!("box {bbox:?} has negative origin or empty extent")));
        }
        self.sum(x as usize, y as usize, w as usize, h as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones() {
        let ii = integral(&Image::filled(2, 2, 1, 1.0).unwrap()).unwrap();
        assert_eq!(ii.at(2, 2), 4.0);
        assert_eq!(ii.at(0, 0), 0.0);
        assert_eq!(ii.at(0, 2), 0.0);
        assert_eq!(ii.at(2, 0), 0.0);
    }

    #[test]
    fn multichannel_rejected() {
        let img = Image::filled(2, 2, 3, 1.0).unwrap();
        assert!(matches!(integral(&img), Err(Error::Channel(_))));
    }

    #[test]
    fn uniform_and_single_pixel_boxes() {
        let img = Image::from_fn(5, 4, |x, y| (x * 7 + y * 3) as f64).unwrap();
        let ii = integral(&img).unwrap();
        for y in 0..4 {
            for x in 0..5 {
                assert_eq!(ii.sum(x, y, 1, 1).unwrap(), img.get(x, y, 0));
            }
        }
        let flat = integral(&Image::filled(6, 6, 1, 9.0).unwrap()).unwrap();
        assert_eq!(flat.rect_sum(&BoundingBox::new(1.0, 2.0, 3.0, 4.0)).unwrap(), 9.0 * 12.0);
    }

    #[test]
    fn out_of_bounds() {
        let ii = integral(&Image::filled(4, 4, 1, 1.0).unwrap()).unwrap();
        assert!(matches!(ii.sum(2, 2, 3, 1), Err(Error::Bounds(_))));
        assert!(matches!(ii.rect_sum(&BoundingBox::new(-1.0, 0.0, 2.0, 2.0)), Err(Error::Bounds(_))));
    }
}
