use crate::error::{Error, Result};

/// Row-major pixel grid with 1 (gray) or 3 (RGB) interleaved channels.
///
/// Intensities are kept as `f64` in `[0, 255]` after decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input(format!("image dimensions must be positive, got {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Channel(format!("expected 1 or 3 channels, got {channels}")));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::input(format!(
                "pixel buffer has {} values, expected {}",
                pixels.len(),
                width * height * channels
            )));
        }
        Ok(Self { width, height, channels, pixels })
    }

    /// Constant-valued image.
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Single-channel image from a per-pixel function `f(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, 1, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.pixels[(y * self.width + x) * self.channels + c] = v;
    }

    /// Copy of the `w`×`h` region at `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Image> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::bounds(format!(
                "crop {w}x{h}+{x}+{y} outside {}x{} image",
                self.width, self.height
            )));
        }
        let c = self.channels;
        let mut pixels = Vec::with_capacity(w * h * c);
        for row in y..y + h {
            let start = (row * self.width + x) * c;
            pixels.extend_from_slice(&self.pixels[start..start + w * c]);
        }
        Image::new(w, h, c, pixels)
    }

    /// Nearest-neighbour resampling: destination pixel `i` reads source
    /// pixel `floor(i * src / dst)`.
    pub fn resize_nearest(&self, new_w: usize, new_h: usize) -> Result<Image> {
        if new_w == 0 || new_h == 0 {
            return Err(Error::config("resize target must be non-empty"));
        }
        let c = self.channels;
        let mut pixels = Vec::with_capacity(new_w * new_h * c);
        for y in 0..new_h {
            let sy = (y * self.height / new_h).min(self.height - 1);
            for x in 0..new_w {
                let sx = (x * self.width / new_w).min(self.width - 1);
                let base = (sy * self.width + sx) * c;
                pixels.extend_from_slice(&self.pixels[base..base + c]);
            }
        }
        Image::new(new_w, new_h, c, pixels)
    }

    /// Three-channel copy; gray values are replicated.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let pixels = self.pixels.iter().flat_map(|&v| [v, v, v]).collect();
        Image { width: self.width, height: self.height, channels: 3, pixels }
    }

    /// Single channel `c` as a gray image.
    pub fn channel(&self, c: usize) -> Result<Image> {
        if c >= self.channels {
            return Err(Error::Channel(format!("channel {c} out of range")));
        }
        let pixels = self.pixels.iter().skip(c).step_by(self.channels).copied().collect();
        Image::new(self.width, self.height, 1, pixels)
    }
}

/// BT.601 luma conversion; gray input is returned unchanged.
pub fn to_grayscale(img: &Image) -> Image {
    if img.channels == 1 {
        return img.clone();
    }
    let pixels = img
        .pixels
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 255.0))
        .collect();
    Image { width: img.width, height: img.height, channels: 1, pixels }
}
