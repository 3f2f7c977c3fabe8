use std::fs;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

/// Reads a binary PGM (`P5`) or PPM (`P6`) file.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = fs::read(path.as_ref())?;
    decode_netpbm(&bytes)
}

/// Writes `img` as `P5` (gray) or `P6` (RGB), rounding and clamping to `u8`.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), encode_netpbm(img))?;
    Ok(())
}

pub fn encode_netpbm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    out
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(format!("missing {what} in netpbm header")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(format!("bad {what} in netpbm header")))
    }
}

pub fn decode_netpbm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 {
        return Err(Error::format("file too short for a netpbm header"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::format(format!(
                "unsupported magic {:?}, expected P5 or P6",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut rd = HeaderReader { bytes, pos: 2 };
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format("zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(format!("maxval {maxval} unsupported (1..=255)")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(rd.pos) {
        Some(b) if b.is_ascii_whitespace() => rd.pos += 1,
        _ => return Err(Error::format("missing whitespace after maxval")),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::format("image dimensions overflow"))?;
    let payload = &bytes[rd.pos..];
    if payload.len() < need {
        return Err(Error::format(format!(
            "truncated raster: {} bytes, expected {need}",
            payload.len()
        )));
    }
    let scale = 255.0 / maxval as f64;
    let pixels = payload[..need]
        .iter()
        .map(|&b| if maxval == 255 { b as f64 } else { (b as f64 * scale).min(255.0) })
        .collect();
    Image::new(width, height, channels, pixels)
}
