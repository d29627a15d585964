//! Dataset indexing and image ingestion.
//!
//! Directory layout (the MVTec AD convention):
//!
//! ```text
//! <root>/<category>/train/good/*.png
//! <root>/<category>/test/good/*.png
//! <root>/<category>/test/<defect>/*.png
//! <root>/<category>/ground_truth/<defect>/<stem>_mask.png
//! ```

pub mod resize;
pub mod synthetic;

use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{GrayImage, Mask};

pub use synthetic::{make_synthetic, Generator, SyntheticDatasetSpec};

/// Default working resolution.
pub const DEFAULT_RESOLUTION: usize = 256;

/// The five MVTec AD texture categories; every other category is an object.
pub const MVTEC_TEXTURES: [&str; 5] = ["carpet", "grid", "leather", "tile", "wood"];
pub const MVTEC_OBJECTS: [&str; 10] = [
    "bottle",
    "cable",
    "capsule",
    "hazelnut",
    "metal_nut",
    "pill",
    "screw",
    "toothbrush",
    "transistor",
    "zipper",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Clean,
    Defective,
}

impl Label {
    pub fn is_defective(self) -> bool {
        self == Label::Defective
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestItem {
    pub path: PathBuf,
    pub label: Label,
    pub defect_type: String,
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub category: String,
    pub train_paths: Vec<PathBuf>,
    pub test_items: Vec<TestItem>,
    /// `(height, width)` images are resampled to.
    pub resolution: (usize, usize),
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        out.push(entry.map_err(|e| Error::io(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?.into_iter().filter(|p| p.is_file() && is_image(p)).collect())
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string()
}

/// Indexes one category of an MVTec-style tree.
pub fn scan_mvtec(root: &Path, category: &str) -> Result<DatasetIndex> {
    let base = root.join(category);
    if !base.is_dir() {
        return Err(Error::Dataset(format!(
            "category directory {} does not exist",
            base.display()
        )));
    }
    let train_dir = base.join("train").join("good");
    let test_dir = base.join("test");
    for dir in [&train_dir, &test_dir] {
        if !dir.is_dir() {
            return Err(Error::Dataset(format!(
                "unexpected layout: {} is missing (expected <category>/train/good and <category>/test/<type>)",
                dir.display()
            )));
        }
    }
    let train_paths = image_files(&train_dir)?;

    let mut test_items = Vec::new();
    for type_dir in sorted_entries(&test_dir)?.into_iter().filter(|p| p.is_dir()) {
        let defect_type = stem(&type_dir);
        let clean = defect_type == "good";
        let gt_dir = base.join("ground_truth").join(&defect_type);
        let masks = if clean || !gt_dir.is_dir() {
            Vec::new()
        } else {
            image_files(&gt_dir)?
        };
        for path in image_files(&type_dir)? {
            let mask = if clean {
                None
            } else {
                let s = stem(&path);
                let prefix = format!("{s}_mask");
                let found = masks.iter().find(|m| stem(m).starts_with(&prefix)).cloned();
                Some(found.ok_or_else(|| Error::MissingMask {
                    stem: s.clone(),
                    path: path.clone(),
                })?)
            };
            test_items.push(TestItem {
                path,
                label: if clean { Label::Clean } else { Label::Defective },
                defect_type: defect_type.clone(),
                mask,
            });
        }
    }
    Ok(DatasetIndex {
        category: category.to_string(),
        train_paths,
        test_items,
        resolution: (DEFAULT_RESOLUTION, DEFAULT_RESOLUTION),
    })
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = image::ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = reader.with_guessed_format().map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Single-channel intensities in `[0, 1]`; color sources use ITU-R BT.601
/// luma weights, alpha is ignored.
fn to_luma(img: &DynamicImage) -> Vec<f32> {
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::L16 | ColorType::La16 => img.to_luma32f().into_raw(),
        _ => img
            .to_rgb32f()
            .pixels()
            .map(|p| 0.299 * p.0[0] + 0.587 * p.0[1] + 0.114 * p.0[2])
            .collect(),
    }
}

/// Decodes `path`, converts to gray and resamples bilinearly to
/// `(height, width)` without preserving aspect ratio.
pub fn load_image(path: &Path, resolution: (usize, usize)) -> Result<GrayImage> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let luma = to_luma(&img);
    let pixels = resize::resize_bilinear(&luma, h, w, resolution.0, resolution.1);
    GrayImage::from_vec_clamped(resolution.0, resolution.1, pixels)
}

/// Loads a ground-truth mask, resampled bilinearly and binarized at 0.5.
pub fn load_mask(path: &Path, resolution: (usize, usize)) -> Result<Mask> {
    let gray = load_image(path, resolution)?;
    Mask::from_vec(
        resolution.0,
        resolution.1,
        gray.pixels().iter().map(|&v| v >= 0.5).collect(),
    )
}

impl DatasetIndex {
    pub fn with_resolution(mut self, resolution: (usize, usize)) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn count(&self, label: Label) -> usize {
        self.test_items.iter().filter(|t| t.label == label).count()
    }

    pub fn load_train(&self, resolution: (usize, usize)) -> Result<Vec<GrayImage>> {
        if self.train_paths.is_empty() {
            return Err(Error::Dataset(format!("category `{}` has no training images", self.category)));
        }
        self.train_paths.iter().map(|p| load_image(p, resolution)).collect()
    }

    /// Loads a test image with its ground truth; clean items get an empty mask.
    pub fn load_test_item(&self, item: &TestItem, resolution: (usize, usize)) -> Result<(GrayImage, Mask)> {
        let image = load_image(&item.path, resolution)?;
        let mask = match (&item.mask, item.label) {
            (Some(m), _) => load_mask(m, resolution)?,
            (None, Label::Clean) => Mask::new(resolution.0, resolution.1),
            (None, Label::Defective) => {
                return Err(Error::MissingMask {
                    stem: stem(&item.path),
                    path: item.path.clone(),
                })
            }
        };
        Ok((image, mask))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_gray(path: &Path, w: u32, h: u32, v: u8) {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        image::GrayImage::from_pixel(w, h, image::Luma([v])).save(path).unwrap();
    }

    fn tree(dir: &Path, with_all_masks: bool) {
        let c = dir.join("widget");
        for i in 0..3 {
            write_gray(&c.join(format!("train/good/{i:03}.png")), 32, 32, 100);
        }
        for i in 0..2 {
            write_gray(&c.join(format!("test/good/{i:03}.png")), 32, 32, 100);
        }
        write_gray(&c.join("test/crack/000.png"), 32, 32, 10);
        write_gray(&c.join("test/crack/001.png"), 32, 32, 10);
        write_gray(&c.join("ground_truth/crack/000_mask.png"), 32, 32, 255);
        if with_all_masks {
            write_gray(&c.join("ground_truth/crack/001_mask.png"), 32, 32, 0);
        }
    }

    #[test]
    fn indexes_counts_and_masks() {
        let dir = tempfile::tempdir().unwrap();
        tree(dir.path(), true);
        let idx = scan_mvtec(dir.path(), "widget").unwrap();
        assert_eq!(idx.train_paths.len(), 3);
        assert_eq!(idx.count(Label::Clean), 2);
        assert_eq!(idx.count(Label::Defective), 2);
        assert!(idx
            .test_items
            .iter()
            .all(|t| t.mask.is_some() == t.label.is_defective()));
        let (img, mask) = idx.load_test_item(&idx.test_items[0], (16, 16)).unwrap();
        assert_eq!(img.dims(), (16, 16));
        assert!(mask.bits().iter().all(|&b| b));
    }

    #[test]
    fn missing_mask_names_the_stem() {
        let dir = tempfile::tempdir().unwrap();
        tree(dir.path(), false);
        match scan_mvtec(dir.path(), "widget") {
            Err(Error::MissingMask { stem, .. }) => assert_eq!(stem, "001"),
            other => panic!("expected missing mask error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_layout_is_descriptive() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("widget/images")).unwrap();
        let err = scan_mvtec(dir.path(), "widget").unwrap_err().to_string();
        assert!(err.contains("train"), "{err}");
        assert!(scan_mvtec(dir.path(), "nothing").is_err());
    }

    #[test]
    fn normalization_and_constant_resize() {
        let dir = tempfile::tempdir().unwrap();
        let white = dir.path().join("white.png");
        write_gray(&white, 512, 512, 255);
        let img = load_image(&white, (256, 256)).unwrap();
        assert_eq!(img.dims(), (256, 256));
        assert!(img.pixels().iter().all(|&v| v == 1.0));
        let mid = dir.path().join("mid.png");
        write_gray(&mid, 20, 20, 128);
        let img = load_image(&mid, (20, 20)).unwrap();
        assert!((img.get(3, 3) - 128.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn rgb_uses_bt601_weights() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.png");
        image::RgbImage::from_pixel(16, 16, image::Rgb([255, 0, 0])).save(&p).unwrap();
        let img = load_image(&p, (16, 16)).unwrap();
        assert!((img.get(0, 0) - 0.299).abs() < 1e-6);
    }

    #[test]
    fn corrupt_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("broken.png");
        std::fs::write(&p, b"\x89PNG garbage").unwrap();
        assert!(load_image(&p, (16, 16)).is_err());
        assert!(matches!(
            load_image(&dir.path().join("absent.png"), (16, 16)),
            Err(Error::Io { .. })
        ));
    }
}
