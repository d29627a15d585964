//! Synthetic corruption of clean training images.
//!
//! All samplers are pure functions of the image and an explicit random
//! stream; callers obtain streams from [`crate::rng::SeedTree`].

pub mod drops;
pub mod raster;
pub mod scratch;
pub mod spline;
pub mod stain;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{GrayImage, Mask};

pub use drops::{sample_drops, Drop};
pub use scratch::{sample_scratch, Scratch, ScratchPath};
pub use stain::{sample_stain, StainShape};

/// Standard deviations allowed for Gaussian corruption.
pub const GAUSSIAN_SIGMAS: [f64; 4] = [0.1, 0.2, 0.4, 0.8];

/// Probability that Mix1 / Mix2 pick the Stain model.
pub const MIX_STAIN_SHARE: f64 = 0.6;
/// Mix1 splits its non-Stain share evenly between Scratch and Drops.
pub const MIX1_SCRATCH_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionKind {
    None,
    Stain,
    Gaussian,
    Scratch,
    Drops,
    Mix1,
    Mix2,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 7] = [
        CorruptionKind::None,
        CorruptionKind::Stain,
        CorruptionKind::Gaussian,
        CorruptionKind::Scratch,
        CorruptionKind::Drops,
        CorruptionKind::Mix1,
        CorruptionKind::Mix2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::None => "none",
            CorruptionKind::Stain => "stain",
            CorruptionKind::Gaussian => "gaussian",
            CorruptionKind::Scratch => "scratch",
            CorruptionKind::Drops => "drops",
            CorruptionKind::Mix1 => "mix1",
            CorruptionKind::Mix2 => "mix2",
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown corruption kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    /// Fixed sigma for Gaussian noise; `None` draws one per image from
    /// [`GAUSSIAN_SIGMAS`].
    #[serde(default)]
    pub gaussian_sigma: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind) -> Self {
        Self {
            kind,
            gaussian_sigma: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(sigma) = self.gaussian_sigma {
            check_sigma(sigma)?;
        }
        Ok(())
    }
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self::new(CorruptionKind::Stain)
    }
}

/// Training triple: corrupted input, clean target, altered-pixel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedSample {
    pub input: GrayImage,
    pub target: GrayImage,
    pub mask: Mask,
    /// Concrete model applied (Mix kinds resolve to one of their members).
    pub applied: CorruptionKind,
}

pub(crate) fn fill_masked(image: &mut GrayImage, mask: &Mask, color: f32) {
    for r in 0..image.height() {
        for c in 0..image.width() {
            if mask.get(r, c) {
                image.set(r, c, color);
            }
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if GAUSSIAN_SIGMAS.iter().any(|s| (s - sigma).abs() < 1e-12) {
        Ok(())
    } else {
        Err(Error::InvalidSigma(sigma))
    }
}

pub fn apply_stain<R: Rng + ?Sized>(image: &GrayImage, rng: &mut R) -> Result<CorruptedSample> {
    let (input, shape) = stain::paint_stain(rng, image)?;
    Ok(CorruptedSample {
        input,
        target: image.clone(),
        mask: shape.raster_mask,
        applied: CorruptionKind::Stain,
    })
}

/// Additive noise offsets `N(0, sigma^2)`, one per pixel, before clamping.
pub fn gaussian_offsets<R: Rng + ?Sized>(rng: &mut R, count: usize, sigma: f64) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    Ok((0..count).map(|_| normal.sample(rng)).collect())
}

pub fn apply_gaussian<R: Rng + ?Sized>(
    image: &GrayImage,
    rng: &mut R,
    sigma: f64,
) -> Result<CorruptedSample> {
    let offsets = gaussian_offsets(rng, image.len(), sigma)?;
    let noisy: Vec<f32> = image
        .pixels()
        .iter()
        .zip(&offsets)
        .map(|(&x, &n)| (x as f64 + n) as f32)
        .collect();
    Ok(CorruptedSample {
        input: GrayImage::from_vec_clamped(image.height(), image.width(), noisy)?,
        target: image.clone(),
        mask: Mask::full(image.height(), image.width()),
        applied: CorruptionKind::Gaussian,
    })
}

pub fn apply_scratch<R: Rng + ?Sized>(image: &GrayImage, rng: &mut R) -> CorruptedSample {
    let (input, scratch) = scratch::paint_scratch(rng, image);
    CorruptedSample {
        input,
        target: image.clone(),
        mask: scratch.mask,
        applied: CorruptionKind::Scratch,
    }
}

pub fn apply_drops<R: Rng + ?Sized>(image: &GrayImage, rng: &mut R) -> CorruptedSample {
    let (input, mask, _) = drops::paint_drops(rng, image);
    CorruptedSample {
        input,
        target: image.clone(),
        mask,
        applied: CorruptionKind::Drops,
    }
}

fn gaussian_with_spec<R: Rng + ?Sized>(
    image: &GrayImage,
    spec: &CorruptionSpec,
    rng: &mut R,
) -> Result<CorruptedSample> {
    let sigma = match spec.gaussian_sigma {
        Some(s) => s,
        None => GAUSSIAN_SIGMAS[rng.random_range(0..GAUSSIAN_SIGMAS.len())],
    };
    apply_gaussian(image, rng, sigma)
}

/// Corrupts `image` according to `spec`, drawing everything from `rng`.
pub fn corrupt<R: Rng + ?Sized>(
    image: &GrayImage,
    spec: &CorruptionSpec,
    rng: &mut R,
) -> Result<CorruptedSample> {
    spec.validate()?;
    match spec.kind {
        CorruptionKind::None => Ok(CorruptedSample {
            input: image.clone(),
            target: image.clone(),
            mask: Mask::new(image.height(), image.width()),
            applied: CorruptionKind::None,
        }),
        CorruptionKind::Stain => apply_stain(image, rng),
        CorruptionKind::Gaussian => gaussian_with_spec(image, spec, rng),
        CorruptionKind::Scratch => Ok(apply_scratch(image, rng)),
        CorruptionKind::Drops => Ok(apply_drops(image, rng)),
        CorruptionKind::Mix1 => {
            let u: f64 = rng.random();
            if u < MIX_STAIN_SHARE {
                apply_stain(image, rng)
            } else if u < MIX_STAIN_SHARE + MIX1_SCRATCH_SHARE {
                Ok(apply_scratch(image, rng))
            } else {
                Ok(apply_drops(image, rng))
            }
        }
        CorruptionKind::Mix2 => {
            let u: f64 = rng.random();
            if u < MIX_STAIN_SHARE {
                apply_stain(image, rng)
            } else {
                gaussian_with_spec(image, spec, rng)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, SeedTree};

    fn gray(v: f32) -> GrayImage {
        GrayImage::filled(64, 64, v).unwrap()
    }

    #[test]
    fn none_is_identity() {
        let img = GrayImage::from_fn(32, 32, |r, c| ((r * 7 + c) % 11) as f32 / 10.0).unwrap();
        let mut rng = SeedTree::new(0).stream(Purpose::Corruption, 0, 0);
        let s = corrupt(&img, &CorruptionSpec::new(CorruptionKind::None), &mut rng).unwrap();
        assert_eq!(s.input, s.target);
        assert!(!s.mask.any());
    }

    #[test]
    fn stain_fill_semantics() {
        let img = gray(0.5);
        let tree = SeedTree::new(12);
        for i in 0..50 {
            let s = apply_stain(&img, &mut tree.stream(Purpose::Corruption, i, 0)).unwrap();
            let color = s
                .input
                .pixels()
                .iter()
                .zip(s.mask.bits())
                .find(|(_, &m)| m)
                .map(|(&v, _)| v)
                .unwrap();
            for (idx, &m) in s.mask.bits().iter().enumerate() {
                let v = s.input.pixels()[idx];
                if m {
                    assert_eq!(v, color);
                } else {
                    assert_eq!(v, 0.5);
                }
            }
        }
    }

    #[test]
    fn gaussian_rejects_unpublished_sigma() {
        let mut rng = SeedTree::new(0).stream(Purpose::Corruption, 0, 0);
        assert!(matches!(apply_gaussian(&gray(0.5), &mut rng, 0.3), Err(Error::InvalidSigma(_))));
        let spec = CorruptionSpec {
            kind: CorruptionKind::Gaussian,
            gaussian_sigma: Some(0.25),
            seed: 0,
        };
        assert!(corrupt(&gray(0.5), &spec, &mut rng).is_err());
    }

    #[test]
    fn gaussian_clamps_at_zero() {
        let mut rng = SeedTree::new(5).stream(Purpose::Corruption, 0, 0);
        let s = apply_gaussian(&gray(0.0), &mut rng, 0.8).unwrap();
        assert!(s.input.pixels().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(s.mask.bits().iter().all(|&b| b));
    }

    #[test]
    fn gaussian_mean_is_unbiased_at_mid_gray() {
        let img = GrayImage::filled(256, 256, 0.5).unwrap();
        let mut rng = SeedTree::new(6).stream(Purpose::Corruption, 0, 0);
        let s = apply_gaussian(&img, &mut rng, 0.1).unwrap();
        let mean: f64 = s.input.pixels().iter().map(|&v| v as f64).sum::<f64>() / 65536.0;
        assert!((mean - 0.5).abs() <= 3.0 * 0.1 / 256.0, "mean {mean}");
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("Mix2".parse::<CorruptionKind>().unwrap(), CorruptionKind::Mix2);
        assert!(matches!("speckle".parse::<CorruptionKind>(), Err(Error::Config(_))));
        let spec: CorruptionSpec = serde_json::from_str(r#"{"kind":"stain"}"#).unwrap();
        assert_eq!(spec.kind, CorruptionKind::Stain);
        assert!(serde_json::from_str::<CorruptionSpec>(r#"{"kind":"speckle"}"#).is_err());
    }
}
