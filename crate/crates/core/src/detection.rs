//! Anomaly maps from reconstructions and their image-level scores.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{write_png, GrayImage};
use crate::model::{Network, Reconstruction, MC_PASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Residual,
    Uncertainty,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::Residual => "residual",
            MapKind::Uncertainty => "uncertainty",
        }
    }
}

/// Which anomaly map a detector builds.
pub type Strategy = MapKind;

/// Per-pixel nonnegative abnormality scores.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
    kind: MapKind,
}

impl AnomalyMap {
    pub fn new(height: usize, width: usize, values: Vec<f32>, kind: MapKind) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::shape(height * width, values.len()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("anomaly map value {v} is not a finite nonnegative number")));
        }
        Ok(Self {
            height,
            width,
            values,
            kind,
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

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    pub fn max(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    /// Multiplies every value by `c >= 0`.
    pub fn scaled(&self, c: f32) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.values.iter().map(|v| v * c).collect(),
            self.kind,
        )
    }

    /// Writes `<stem>.f32` (raw little-endian f32, row-major), `<stem>.json`
    /// (dims, kind, provenance) and `<stem>.png` (min-max scaled preview).
    pub fn save(&self, stem: &Path, source_image: &str, checkpoint_hash: &str) -> Result<()> {
        if let Some(parent) = stem.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let raw_path = stem.with_extension("f32");
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(&raw_path, bytes).map_err(|e| Error::io(&raw_path, e))?;
        let header = serde_json::json!({
            "height": self.height,
            "width": self.width,
            "dtype": "f32le",
            "kind": self.kind,
            "source_image": source_image,
            "checkpoint_hash": checkpoint_hash,
        });
        let json_path = stem.with_extension("json");
        std::fs::write(&json_path, serde_json::to_vec_pretty(&header)?).map_err(|e| Error::io(&json_path, e))?;
        write_png(
            &stem.with_extension("png"),
            self.width,
            self.height,
            png::BitDepth::Eight,
            &self.preview_u8(),
        )
    }

    /// Reads a map written by [`AnomalyMap::save`].
    pub fn load(stem: &Path) -> Result<Self> {
        let json_path = stem.with_extension("json");
        let header: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&json_path).map_err(|e| Error::io(&json_path, e))?)?;
        let height = header["height"].as_u64().unwrap_or(0) as usize;
        let width = header["width"].as_u64().unwrap_or(0) as usize;
        let kind: MapKind = serde_json::from_value(header["kind"].clone())?;
        let raw_path = stem.with_extension("f32");
        let bytes = std::fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(height, width, values, kind)
    }

    /// Min-max scaled 8-bit rendering.
    pub fn preview_u8(&self) -> Vec<u8> {
        let lo = self.values.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = self.values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let span = hi - lo;
        self.values
            .iter()
            .map(|&v| {
                if span > 0.0 {
                    ((v - lo) / span * 255.0).round() as u8
                } else {
                    0
                }
            })
            .collect()
    }
}

/// `|x - x_hat|` per pixel.
pub fn residual_map(x: &GrayImage, xhat: &Reconstruction) -> Result<AnomalyMap> {
    let r = xhat.image();
    if x.dims() != r.dims() {
        return Err(Error::shape(
            format!("{}x{}", x.height(), x.width()),
            format!("{}x{}", r.height(), r.width()),
        ));
    }
    let values = x.pixels().iter().zip(r.pixels()).map(|(a, b)| (a - b).abs()).collect();
    AnomalyMap::new(x.height(), x.width(), values, MapKind::Residual)
}

/// Per-pixel population variance (divide by N) across a stack of stochastic
/// reconstructions.
pub fn uncertainty_map(stack: &[Reconstruction]) -> Result<AnomalyMap> {
    if stack.len() < 2 {
        return Err(Error::Config(format!(
            "uncertainty needs at least 2 reconstructions, got {}",
            stack.len()
        )));
    }
    let (h, w) = stack[0].image().dims();
    if let Some(bad) = stack.iter().find(|r| r.image().dims() != (h, w)) {
        return Err(Error::shape(format!("{h}x{w}"), format!("{:?}", bad.image().dims())));
    }
    let n = stack.len() as f64;
    let mut mean = vec![0.0f64; h * w];
    for r in stack {
        for (m, &v) in mean.iter_mut().zip(r.image().pixels()) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; h * w];
    for r in stack {
        for ((s, &m), &v) in var.iter_mut().zip(&mean).zip(r.image().pixels()) {
            *s += (v as f64 - m).powi(2);
        }
    }
    let values = var.iter().map(|s| (s / n) as f32).collect();
    AnomalyMap::new(h, w, values, MapKind::Uncertainty)
}

/// `(sum values^p)^(1/p)`, the image-level anomaly score.
pub fn image_score(map: &AnomalyMap, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Config(format!("norm exponent p = {p} must be >= 1")));
    }
    let sum: f64 = if p == 2.0 {
        map.values.iter().map(|&v| (v as f64) * (v as f64)).sum()
    } else {
        map.values.iter().map(|&v| (v as f64).powf(p)).sum()
    };
    Ok(sum.powf(1.0 / p))
}

/// A pixel's score together with its location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelScore {
    pub score: f32,
    pub row: usize,
    pub col: usize,
}

/// Row-major flattening of the map.
pub fn pixel_scores(map: &AnomalyMap) -> Vec<PixelScore> {
    map.values
        .iter()
        .enumerate()
        .map(|(i, &score)| PixelScore {
            score,
            row: i / map.width,
            col: i % map.width,
        })
        .collect()
}

/// Builds the anomaly map of `image` for the given strategy: residual from a
/// dropout-free pass, or MC-dropout variance over `passes` stochastic passes.
pub fn detect<R: Rng + ?Sized>(
    network: &Network<f32>,
    image: &GrayImage,
    strategy: Strategy,
    passes: usize,
    rng: &mut R,
) -> Result<AnomalyMap> {
    match strategy {
        MapKind::Residual => residual_map(image, &network.forward(image)?),
        MapKind::Uncertainty => uncertainty_map(&network.mc_forward(image, passes, rng)?),
    }
}

/// Default detection settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    pub p: f64,
    pub passes: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            passes: MC_PASSES,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recon(v: f32) -> Reconstruction {
        Reconstruction(GrayImage::filled(16, 16, v).unwrap())
    }

    #[test]
    fn residual_basics() {
        let x = GrayImage::filled(16, 16, 0.2).unwrap();
        let m = residual_map(&x, &recon(0.2)).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
        let m = residual_map(&x, &recon(0.9)).unwrap();
        assert!(m.values().iter().all(|&v| (v - 0.7).abs() < 1e-6));
        let back = residual_map(&GrayImage::filled(16, 16, 0.9).unwrap(), &recon(0.2)).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.kind(), MapKind::Residual);
        let small = GrayImage::filled(16, 32, 0.2).unwrap();
        assert!(residual_map(&small, &recon(0.2)).is_err());
    }

    #[test]
    fn variance_is_population() {
        let m = uncertainty_map(&[recon(0.0), recon(1.0)]).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.25));
        let m = uncertainty_map(&[recon(0.4), recon(0.4), recon(0.4)]).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
        assert!(uncertainty_map(&[recon(0.4)]).is_err());
    }

    #[test]
    fn lp_norm_cases() {
        let zero = AnomalyMap::new(256, 256, vec![0.0; 65536], MapKind::Residual).unwrap();
        assert_eq!(image_score(&zero, 2.0).unwrap(), 0.0);
        let mut one_px = vec![0.0; 16];
        one_px[5] = 3.0;
        let m = AnomalyMap::new(4, 4, one_px, MapKind::Residual).unwrap();
        assert_eq!(image_score(&m, 2.0).unwrap(), 3.0);
        let ones = AnomalyMap::new(2, 2, vec![1.0; 4], MapKind::Uncertainty).unwrap();
        assert_eq!(image_score(&ones, 2.0).unwrap(), 2.0);
        assert_eq!(image_score(&ones, 1.0).unwrap(), 4.0);
        assert!(image_score(&ones, 0.5).is_err());
    }

    #[test]
    fn flattening() {
        let m = AnomalyMap::new(2, 2, vec![0.0, 1.0, 2.0, 3.0], MapKind::Residual).unwrap();
        let s = pixel_scores(&m);
        assert_eq!(s.iter().map(|p| p.score).collect::<Vec<_>>(), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!((s[2].row, s[2].col), (1, 0));
        assert_eq!(s, pixel_scores(&m));
        assert_eq!(s.iter().map(|p| p.score).fold(0.0, f32::max), m.max());
    }

    #[test]
    fn rejects_negative_values() {
        assert!(AnomalyMap::new(1, 2, vec![0.0, -1.0], MapKind::Residual).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let m = AnomalyMap::new(16, 16, (0..256).map(|i| i as f32 / 7.0).collect(), MapKind::Uncertainty).unwrap();
        let stem = dir.path().join("maps/a");
        m.save(&stem, "img.png", "abc").unwrap();
        assert_eq!(AnomalyMap::load(&stem).unwrap(), m);
        assert!(stem.with_extension("png").exists());
    }
}
