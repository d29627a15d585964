//! Procedural texture datasets in the MVTec directory layout, for runs that
//! do not have the real benchmark at hand.
//!
//! Every image is a fresh draw of one texture family with per-image phase,
//! orientation and contrast jitter. Defective test images are clean draws
//! with a synthetic defect injected; the injector's mask is written as the
//! ground truth.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{scan_mvtec, DatasetIndex};
use crate::corruption::{corrupt, CorruptionKind, CorruptionSpec};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng::{Purpose, SeedTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Checker,
    Stripes,
    Blobs,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::Checker => "checker",
            Generator::Stripes => "stripes",
            Generator::Blobs => "blobs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDatasetSpec {
    pub generator: Generator,
    pub count_train: usize,
    pub count_test_clean: usize,
    pub count_test_defective: usize,
    pub defect_injector: CorruptionSpec,
    pub seed: u64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Category directory name; defaults to the generator name.
    #[serde(default)]
    pub category: Option<String>,
}

fn default_resolution() -> usize {
    super::DEFAULT_RESOLUTION
}

impl SyntheticDatasetSpec {
    pub fn new(generator: Generator, train: usize, clean: usize, defective: usize, seed: u64) -> Self {
        Self {
            generator,
            count_train: train,
            count_test_clean: clean,
            count_test_defective: defective,
            defect_injector: CorruptionSpec::new(CorruptionKind::Stain),
            seed,
            resolution: default_resolution(),
            category: None,
        }
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn category(&self) -> String {
        self.category.clone().unwrap_or_else(|| self.generator.name().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.count_train == 0 || self.count_test_clean == 0 || self.count_test_defective == 0 {
            return Err(Error::Config("synthetic dataset counts must all be at least 1".into()));
        }
        if self.defect_injector.kind == CorruptionKind::None {
            return Err(Error::Config("defect injector kind must not be `none`".into()));
        }
        if self.resolution < crate::image::MIN_SIDE {
            return Err(Error::DegenerateImage {
                height: self.resolution,
                width: self.resolution,
            });
        }
        self.defect_injector.validate()
    }
}

/// Draws one texture image.
pub fn generate_texture<R: Rng + ?Sized>(generator: Generator, size: usize, rng: &mut R) -> Result<GrayImage> {
    let scale = size as f64 / 64.0;
    match generator {
        Generator::Checker => {
            let cell = 8.0 * scale;
            let (dr, dc) = (rng.random_range(0.0..2.0 * cell), rng.random_range(0.0..2.0 * cell));
            let lo = rng.random_range(0.25..0.35);
            let hi = rng.random_range(0.65..0.75);
            let shade = rng.random_range(-0.04..0.04);
            GrayImage::from_fn(size, size, |r, c| {
                let (y, x) = (r as f64 + 0.5 + dr, c as f64 + 0.5 + dc);
                let s = (PI * y / cell).sin() * (PI * x / cell).sin();
                // Soft edges: about one pixel wide.
                let t = 0.5 + 0.5 * (s * 3.0 * scale.max(1.0)).tanh();
                (lo + (hi - lo) * t + shade * (y / size as f64 - 0.5)) as f32
            })
        }
        Generator::Stripes => {
            let theta = PI / 4.0 + rng.random_range(-0.1..0.1);
            let period = 10.0 * scale * rng.random_range(0.95..1.05);
            let phase = rng.random_range(0.0..TAU);
            let contrast = rng.random_range(0.22..0.28);
            let (ct, st) = (theta.cos(), theta.sin());
            GrayImage::from_fn(size, size, |r, c| {
                let u = (c as f64 + 0.5) * ct + (r as f64 + 0.5) * st;
                (0.5 + contrast * (TAU * u / period + phase).sin()) as f32
            })
        }
        Generator::Blobs => {
            let bumps: Vec<(f64, f64, f64, f64)> = (0..12)
                .map(|_| {
                    (
                        rng.random_range(0.0..size as f64),
                        rng.random_range(0.0..size as f64),
                        rng.random_range(4.0..8.0) * scale,
                        rng.random_range(-0.3..0.3),
                    )
                })
                .collect();
            GrayImage::from_fn(size, size, |r, c| {
                let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
                let v: f64 = bumps
                    .iter()
                    .map(|&(by, bx, s, a)| a * (-((y - by).powi(2) + (x - bx).powi(2)) / (2.0 * s * s)).exp())
                    .sum();
                // Soft limit keeps values off the clipping rails.
                (0.5 + 0.4 * (v / 0.4).tanh()) as f32
            })
        }
    }
}

/// Rounds to the 8-bit grid so that what is written equals what is used.
fn quantize(img: &GrayImage) -> Result<GrayImage> {
    let bytes = img.to_u8();
    GrayImage::from_vec(
        img.height(),
        img.width(),
        bytes.into_iter().map(|b| b as f32 / 255.0).collect(),
    )
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    path: PathBuf,
    split: &'static str,
    label: &'static str,
    mask: Option<PathBuf>,
    corruption: Option<CorruptionKind>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    seed: u64,
    spec: &'a SyntheticDatasetSpec,
    files: Vec<ManifestEntry>,
}

/// Writes a synthetic dataset under `out_root/<category>/` and returns its index.
pub fn make_synthetic(spec: &SyntheticDatasetSpec, out_root: &Path) -> Result<DatasetIndex> {
    spec.validate()?;
    let category = spec.category();
    let base = out_root.join(&category);
    let defect_dir = spec.defect_injector.kind.name();
    let seeds = SeedTree::new(spec.seed);
    let size = spec.resolution;
    let mut files = Vec::new();
    let mut image_no = 0u64;
    let next_clean = |image_no: &mut u64| -> Result<GrayImage> {
        let img = generate_texture(spec.generator, size, &mut seeds.stream(Purpose::Synthetic, *image_no, 0))?;
        *image_no += 1;
        quantize(&img)
    };

    for i in 0..spec.count_train {
        let rel = PathBuf::from(format!("train/good/{i:03}.png"));
        next_clean(&mut image_no)?.save_png(&base.join(&rel))?;
        files.push(ManifestEntry {
            path: rel,
            split: "train",
            label: "clean",
            mask: None,
            corruption: None,
        });
    }
    for i in 0..spec.count_test_clean {
        let rel = PathBuf::from(format!("test/good/{i:03}.png"));
        next_clean(&mut image_no)?.save_png(&base.join(&rel))?;
        files.push(ManifestEntry {
            path: rel,
            split: "test",
            label: "clean",
            mask: None,
            corruption: None,
        });
    }
    for i in 0..spec.count_test_defective {
        let clean = next_clean(&mut image_no)?;
        let sample = corrupt(
            &clean,
            &spec.defect_injector,
            &mut seeds.stream(Purpose::Synthetic, image_no - 1, 1),
        )?;
        let rel = PathBuf::from(format!("test/{defect_dir}/{i:03}.png"));
        let mask_rel = PathBuf::from(format!("ground_truth/{defect_dir}/{i:03}_mask.png"));
        sample.input.save_png(&base.join(&rel))?;
        sample.mask.save_png_8bit(&base.join(&mask_rel))?;
        files.push(ManifestEntry {
            path: rel,
            split: "test",
            label: "defective",
            mask: Some(mask_rel),
            corruption: Some(sample.applied),
        });
    }

    let manifest = Manifest {
        seed: spec.seed,
        spec,
        files,
    };
    let manifest_path = base.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?)
        .map_err(|e| Error::io(&manifest_path, e))?;
    Ok(scan_mvtec(out_root, &category)?.with_resolution((size, size)))
}
