//! Single-channel rasters: [`GrayImage`] intensities and boolean [`Mask`]s.
//!
//! Both are row-major: index `(row, col)` maps to `row * width + col`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};

/// Smallest side length accepted for a [`GrayImage`].
pub const MIN_SIDE: usize = 16;

/// Normalized grayscale image with every intensity in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f32>,
}

impl GrayImage {
    /// Builds an image from row-major pixels, clamping nothing: values outside
    /// `[0, 1]` or non-finite values are rejected.
    pub fn from_vec(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        check_dims(height, width)?;
        if pixels.len() != height * width {
            return Err(Error::shape(height * width, pixels.len()));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("pixel intensity {bad} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::from_vec(height, width, vec![value; height * width])
    }

    /// Builds an image by evaluating `f(row, col)`; results are clamped to `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        check_dims(height, width)?;
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(clamp_unit(f(r, c)));
            }
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    /// Wraps raw values after clamping each into `[0, 1]` (NaN maps to 0).
    pub fn from_vec_clamped(height: usize, width: usize, mut pixels: Vec<f32>) -> Result<Self> {
        pixels.iter_mut().for_each(|v| *v = clamp_unit(*v));
        Self::from_vec(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    /// Writes a value, clamped to `[0, 1]`.
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.pixels[row * self.width + col] = clamp_unit(value);
    }

    pub fn min_side(&self) -> usize {
        self.height.min(self.width)
    }

    /// Quantizes to 8 bits with round-to-nearest.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Saves as an 8-bit grayscale PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        write_png(path, self.width, self.height, png::BitDepth::Eight, &self.to_u8())
    }
}

/// Boolean raster of the same layout as [`GrayImage`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::shape(height * width, bits.len()));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }

    pub fn union_with(&mut self, other: &Mask) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    /// Keeps only the 4-connected component containing `(row, col)`.
    /// The seed pixel is switched on first, so the result is never empty.
    pub fn retain_component(&mut self, row: usize, col: usize) {
        let (h, w) = (self.height, self.width);
        self.set(row, col, true);
        let mut keep = vec![false; h * w];
        let mut stack = vec![(row, col)];
        keep[row * w + col] = true;
        while let Some((r, c)) = stack.pop() {
            let mut visit = |rr: usize, cc: usize| {
                let idx = rr * w + cc;
                if self.bits[idx] && !keep[idx] {
                    keep[idx] = true;
                    stack.push((rr, cc));
                }
            };
            if r > 0 {
                visit(r - 1, c);
            }
            if r + 1 < h {
                visit(r + 1, c);
            }
            if c > 0 {
                visit(r, c - 1);
            }
            if c + 1 < w {
                visit(r, c + 1);
            }
        }
        self.bits = keep;
    }

    /// Number of 4-connected components of set pixels.
    pub fn component_count(&self) -> usize {
        let (h, w) = (self.height, self.width);
        let mut seen = vec![false; h * w];
        let mut count = 0;
        for start in 0..h * w {
            if !self.bits[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(idx) = stack.pop() {
                let (r, c) = (idx / w, idx % w);
                let mut neighbours = Vec::with_capacity(4);
                if r > 0 {
                    neighbours.push(idx - w);
                }
                if r + 1 < h {
                    neighbours.push(idx + w);
                }
                if c > 0 {
                    neighbours.push(idx - 1);
                }
                if c + 1 < w {
                    neighbours.push(idx + 1);
                }
                for n in neighbours {
                    if self.bits[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        count
    }

    /// Saves as a 1-bit grayscale PNG (set pixels white).
    pub fn save_png_1bit(&self, path: &Path) -> Result<()> {
        let row_bytes = self.width.div_ceil(8);
        let mut packed = vec![0u8; row_bytes * self.height];
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) {
                    packed[r * row_bytes + c / 8] |= 0x80 >> (c % 8);
                }
            }
        }
        write_png(path, self.width, self.height, png::BitDepth::One, &packed)
    }

    /// Saves as an 8-bit PNG with values 0 / 255, the usual ground-truth layout.
    pub fn save_png_8bit(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        write_png(path, self.width, self.height, png::BitDepth::Eight, &bytes)
    }
}

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height < MIN_SIDE || width < MIN_SIDE {
        return Err(Error::DegenerateImage { height, width });
    }
    Ok(())
}

pub(crate) fn clamp_unit(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

pub(crate) fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    depth: png::BitDepth,
    data: &[u8],
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(depth);
    let to_io = |e: png::EncodingError| {
        Error::io(path, std::io::Error::other(e.to_string()))
    };
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(data).map_err(to_io)?;
    writer.finish().map_err(to_io)?;
    Ok(())
}
