//! Single-channel intensity images in `[0,1]`, binary PGM I/O, and the
//! drawing primitives the scene generator and overlay renderer share.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PixelPoint;

/// Row-major grayscale image with intensities in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRaster {
    width: u32,
    height: u32,
    pixels: Vec<f64>,
}

/// One anti-aliased pixel contribution: position plus coverage in `(0,1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoveredPixel {
    pub x: u32,
    pub y: u32,
    pub coverage: f64,
}

impl ImageRaster {
    pub fn new(width: u32, height: u32, fill: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("zero-area image"));
        }
        if !(0.0..=1.0).contains(&fill) {
            return Err(Error::domain("fill intensity outside [0,1]"));
        }
        Ok(ImageRaster {
            width,
            height,
            pixels: vec![fill; (width * height) as usize],
        })
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("zero-area image"));
        }
        if pixels.len() != (width * height) as usize {
            return Err(Error::domain("pixel count does not match dimensions"));
        }
        if pixels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("pixel intensity outside [0,1]"));
        }
        Ok(ImageRaster {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: f64) {
        self.pixels[(y * self.width + x) as usize] = v.clamp(0.0, 1.0);
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Alpha-composites `intensity` over the pixel with weight `coverage`.
    pub fn blend(&mut self, x: u32, y: u32, intensity: f64, coverage: f64) {
        let c = coverage.clamp(0.0, 1.0);
        let old = self.get(x, y);
        self.set(x, y, old * (1.0 - c) + intensity * c);
    }

    /// Pixel coverages of a line segment of the given thickness, anti-aliased
    /// by perpendicular distance. Sorted by `(y, x)`; one entry per pixel.
    pub fn line_coverage(
        &self,
        a: PixelPoint,
        b: PixelPoint,
        thickness: f64,
    ) -> Vec<CoveredPixel> {
        let half = thickness.max(1.0) / 2.0;
        let reach = half + 1.0;
        let x0 = ((a.x.min(b.x) - reach).floor().max(0.0)) as i64;
        let x1 = ((a.x.max(b.x) + reach).ceil().min(self.width as f64 - 1.0)) as i64;
        let y0 = ((a.y.min(b.y) - reach).floor().max(0.0)) as i64;
        let y1 = ((a.y.max(b.y) + reach).ceil().min(self.height as f64 - 1.0)) as i64;
        let mut out = Vec::new();
        if x1 < x0 || y1 < y0 {
            return out;
        }
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        let len2 = dx * dx + dy * dy;
        // Walk rows; skip pixels far from the segment in x when the segment
        // is closer to vertical, and vice versa, by testing actual distance.
        for y in y0..=y1 {
            for x in x0..=x1 {
                let px = x as f64 + 0.5;
                let py = y as f64 + 0.5;
                let dist = if len2 == 0.0 {
                    ((px - a.x).powi(2) + (py - a.y).powi(2)).sqrt()
                } else {
                    let t = (((px - a.x) * dx + (py - a.y) * dy) / len2).clamp(0.0, 1.0);
                    let cx = a.x + t * dx;
                    let cy = a.y + t * dy;
                    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
                };
                // Coverage ramps linearly over one pixel at the line edge.
                let coverage = (half + 0.5 - dist).clamp(0.0, 1.0);
                if coverage > 0.0 {
                    out.push(CoveredPixel {
                        x: x as u32,
                        y: y as u32,
                        coverage,
                    });
                }
            }
        }
        out
    }

    /// Draws an anti-aliased segment and returns the pixels it touched.
    pub fn draw_line(
        &mut self,
        a: PixelPoint,
        b: PixelPoint,
        intensity: f64,
        thickness: f64,
    ) -> Vec<CoveredPixel> {
        let covered = self.line_coverage(a, b, thickness);
        for p in &covered {
            self.blend(p.x, p.y, intensity, p.coverage);
        }
        covered
    }

    /// Draws a filled disc with a one-pixel soft edge.
    pub fn draw_disc(&mut self, center: PixelPoint, radius: f64, intensity: f64) {
        let reach = radius + 1.0;
        let x0 = ((center.x - reach).floor().max(0.0)) as i64;
        let x1 = ((center.x + reach).ceil().min(self.width as f64 - 1.0)) as i64;
        let y0 = ((center.y - reach).floor().max(0.0)) as i64;
        let y1 = ((center.y + reach).ceil().min(self.height as f64 - 1.0)) as i64;
        for y in y0..=y1.max(y0) {
            for x in x0..=x1.max(x0) {
                let d = ((x as f64 + 0.5 - center.x).powi(2)
                    + (y as f64 + 0.5 - center.y).powi(2))
                .sqrt();
                let c = (radius + 0.5 - d).clamp(0.0, 1.0);
                if c > 0.0 {
                    self.blend(x as u32, y as u32, intensity, c);
                }
            }
        }
    }

    /// Draws a circle outline of the given stroke width.
    pub fn draw_circle(
        &mut self,
        center: PixelPoint,
        radius: f64,
        stroke: f64,
        intensity: f64,
    ) {
        let reach = radius + stroke + 1.0;
        let x0 = ((center.x - reach).floor().max(0.0)) as i64;
        let x1 = ((center.x + reach).ceil().min(self.width as f64 - 1.0)) as i64;
        let y0 = ((center.y - reach).floor().max(0.0)) as i64;
        let y1 = ((center.y + reach).ceil().min(self.height as f64 - 1.0)) as i64;
        let half = stroke.max(1.0) / 2.0;
        for y in y0..=y1.max(y0) {
            for x in x0..=x1.max(x0) {
                let d = ((x as f64 + 0.5 - center.x).powi(2)
                    + (y as f64 + 0.5 - center.y).powi(2))
                .sqrt();
                let c = (half + 0.5 - (d - radius).abs()).clamp(0.0, 1.0);
                if c > 0.0 {
                    self.blend(x as u32, y as u32, intensity, c);
                }
            }
        }
    }

    /// Box blur with a `(2r+1) x (2r+1)` kernel and clamp-to-edge borders.
    /// `radius == 0` is the identity.
    pub fn box_blur(&self, radius: u32) -> ImageRaster {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as i64;
        let norm = ((2 * r + 1) * (2 * r + 1)) as f64;
        let mut out = self.clone();
        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                let mut acc = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let sx = (x + dx).clamp(0, self.width as i64 - 1) as u32;
                        let sy = (y + dy).clamp(0, self.height as i64 - 1) as u32;
                        acc += self.get(sx, sy);
                    }
                }
                out.set(x as u32, y as u32, acc / norm);
            }
        }
        out
    }
}

/// Writes an 8-bit binary PGM (P5, maxval 255). Intensities quantize by
/// round-half-up of `v * 255`.
pub fn write_pgm(img: &ImageRaster, path: &Path) -> Result<()> {
    fs::write(path, pgm_bytes(img)).map_err(|e| Error::io(path, e))
}

/// Serializes an image as [`write_pgm`] would, without touching the
/// filesystem.
pub fn pgm_bytes(img: &ImageRaster) -> Vec<u8> {
    let mut bytes = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    bytes.extend(img.pixels().iter().map(|v| quantize(*v)));
    bytes
}

fn quantize(v: f64) -> u8 {
    // round half up, exact for the golden 0.5 -> 128 case
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Reads a binary PGM written by [`write_pgm`]; only P5 with maxval 255 is
/// accepted. Intensity maps back as `byte / 255`.
pub fn read_pgm(path: &Path) -> Result<ImageRaster> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<ImageRaster> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(Error::parse("missing P5 magic", 0));
    }
    let mut pos = 2usize;
    let width = read_token_u32(bytes, &mut pos)?;
    let height = read_token_u32(bytes, &mut pos)?;
    let maxval = read_token_u32(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::parse(format!("unsupported maxval {maxval}"), pos));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::parse("missing whitespace after maxval", pos));
    }
    pos += 1;
    let expected = width as usize * height as usize;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::parse(
            format!(
                "truncated payload: expected {expected} bytes, found {}",
                payload.len()
            ),
            pos + payload.len(),
        ));
    }
    let pixels = payload[..expected]
        .iter()
        .map(|b| *b as f64 / 255.0)
        .collect();
    ImageRaster::from_pixels(width, height, pixels)
}

fn read_token_u32(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::parse("expected integer in PGM header", start));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .expect("ascii digits")
        .parse()
        .map_err(|_| Error::parse("integer overflow in PGM header", start))
}
