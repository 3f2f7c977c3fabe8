use crate::imagecore::Image;

/// Per-pixel gradient magnitude and unsigned orientation in `[0, 180)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
    pub angle: Vec<f64>,
}

impl GradientField {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.magnitude[i], self.angle[i])
    }
}

/// Folds an `atan2` result in degrees to `[0, 180)`.
#[inline]
pub(crate) fn unsigned_angle(gy: f64, gx: f64) -> f64 {
    let mut a = gy.atan2(gx).to_degrees();
    if a < 0.0 {
        a += 180.0;
    }
    if a >= 180.0 {
        a -= 180.0;
    }
    // also maps -0.0 to 0.0
    a + 0.0
}

/// Central differences `[-1, 0, 1]` with replicated borders. For colour
/// input the channel with the largest magnitude wins at each pixel.
pub fn compute_gradients(img: &Image) -> GradientField {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let px = img.pixels();
    let mut magnitude = vec![0.0; w * h];
    let mut angle = vec![0.0; w * h];
    for y in 0..h {
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let mut best = (-1.0, 0.0, 0.0);
            for ch in 0..c {
                let gx = px[(y * w + xr) * c + ch] - px[(y * w + xl) * c + ch];
                let gy = px[(yd * w + x) * c + ch] - px[(yu * w + x) * c + ch];
                let m = (gx * gx + gy * gy).sqrt();
                if m > best.0 {
                    best = (m, gx, gy);
                }
            }
            let i = y * w + x;
            magnitude[i] = best.0;
            angle[i] = if best.0 > 0.0 { unsigned_angle(best.2, best.1) } else { 0.0 };
        }
    }
    GradientField { width: w, height: h, magnitude, angle }
}
