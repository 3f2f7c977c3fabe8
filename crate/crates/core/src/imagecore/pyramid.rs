use super::Image;
use crate::error::{Error, Result};

/// One level of an image pyramid.
#[derive(Debug, Clone)]
pub struct PyramidLevel {
    pub image: Image,
    /// original width / level width (≥ 1)
    pub scale: f64,
    /// original height / level height
    pub scale_y: f64,
}

/// Nearest-neighbour pyramid: level `k` is `floor(side / scale_factor^k)`.
///
/// Level 0 is always the original image. Shrinking stops once either side
/// would fall below `min_side`; levels that would not shrink are skipped so
/// scales strictly increase.
pub fn build_pyramid(img: &Image, scale_factor: f64, min_side: usize) -> Result<Vec<PyramidLevel>> {
    if !(scale_factor > 1.0) || !scale_factor.is_finite() {
        return Err(Error::config(format!("pyramid scale factor must be > 1, got {scale_factor}")));
    }
    if min_side < 8 {
        return Err(Error::config(format!("pyramid min_side must be >= 8, got {min_side}")));
    }
    let (w0, h0) = (img.width(), img.height());
    let mut levels = vec![PyramidLevel { image: img.clone(), scale: 1.0, scale_y: 1.0 }];
    let mut k = 1;
    loop {
        let f = scale_factor.powi(k);
        let w = (w0 as f64 / f).floor() as usize;
        let h = (h0 as f64 / f).floor() as usize;
        if w < min_side || h < min_side {
            break;
        }
        let last = &levels[levels.len() - 1].image;
        if w < last.width() || h < last.height() {
            let image = img.resize_nearest(w, h)?;
            levels.push(PyramidLevel { image, scale: w0 as f64 / w as f64, scale_y: h0 as f64 / h as f64 });
        }
        k += 1;
    }
    Ok(levels)
}
