//! Image-wise and pixel-wise detection quality of a trained network.

pub mod plot;
pub mod report;
pub mod roc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetIndex, Label};
use crate::detection::{detect, image_score, AnomalyMap, MapKind};
use crate::error::Result;
use crate::image::{GrayImage, Mask};
use crate::model::Network;
use crate::rng::{Purpose, SeedTree};

pub use report::{render_report, CategoryResult, Column, EvalReport, ReportRow, SavedCategory};
pub use roc::{roc_auc, roc_auc_f32, RocResult};

/// Detection settings shared by every test image of an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub strategy: MapKind,
    /// Exponent of the image-level norm.
    pub p: f64,
    /// MC dropout passes for the uncertainty strategy.
    pub passes: usize,
    /// Root seed; test image `i` draws its dropout masks from its own stream.
    pub seed: u64,
}

impl ScoringConfig {
    pub fn new(strategy: MapKind, seed: u64) -> Self {
        Self {
            strategy,
            p: 2.0,
            passes: crate::model::MC_PASSES,
            seed,
        }
    }
}

/// One scored test image.
#[derive(Debug, Clone)]
pub struct ScoredItem {
    pub label: Label,
    pub score: f64,
    pub image: GrayImage,
    pub map: AnomalyMap,
    pub mask: Mask,
}

/// Computes the anomaly map and image score of every test image. Work is
/// spread over the current rayon pool; results do not depend on its size.
pub fn score_test_set(network: &Network<f32>, index: &DatasetIndex, cfg: &ScoringConfig) -> Result<Vec<ScoredItem>> {
    let seeds = SeedTree::new(cfg.seed);
    index
        .test_items
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let (image, mask) = index.load_test_item(item, index.resolution)?;
            let mut rng = seeds.stream(Purpose::McDropout, i as u64, 0);
            let map = detect(network, &image, cfg.strategy, cfg.passes, &mut rng)?;
            let score = image_score(&map, cfg.p)?;
            Ok(ScoredItem {
                label: item.label,
                score,
                image,
                map,
                mask,
            })
        })
        .collect()
}

/// ROC over images, defective being the positive class.
pub fn image_wise_roc(items: &[ScoredItem]) -> Result<RocResult> {
    let scores: Vec<f64> = items.iter().map(|s| s.score).collect();
    let labels: Vec<bool> = items.iter().map(|s| s.label.is_defective()).collect();
    roc_auc(&scores, &labels)
}

/// ROC over every pixel of every test image pooled together; clean images
/// contribute only negatives.
pub fn pixel_wise_roc(items: &[ScoredItem]) -> Result<RocResult> {
    let total: usize = items.iter().map(|s| s.map.values().len()).sum();
    let mut scores = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for item in items {
        if item.map.dims() != item.mask.dims() {
            return Err(crate::Error::shape(
                format!("{:?}", item.map.dims()),
                format!("{:?}", item.mask.dims()),
            ));
        }
        scores.extend(item.map.values().iter().map(|&v| v as f64));
        labels.extend_from_slice(item.mask.bits());
    }
    roc_auc(&scores, &labels)
}

pub fn evaluate_image_wise(network: &Network<f32>, index: &DatasetIndex, cfg: &ScoringConfig) -> Result<RocResult> {
    image_wise_roc(&score_test_set(network, index, cfg)?)
}

pub fn evaluate_pixel_wise(network: &Network<f32>, index: &DatasetIndex, cfg: &ScoringConfig) -> Result<RocResult> {
    pixel_wise_roc(&score_test_set(network, index, cfg)?)
}

/// Which AUCs to compute for a category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub strategies: Vec<MapKind>,
    pub image_wise: bool,
    pub pixel_wise: bool,
    pub p: f64,
    pub passes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            strategies: vec![MapKind::Residual, MapKind::Uncertainty],
            image_wise: true,
            pixel_wise: true,
            p: 2.0,
            passes: crate::model::MC_PASSES,
        }
    }
}

/// Scores the test set once per strategy and fills the requested cells.
pub fn evaluate_category(
    network: &Network<f32>,
    index: &DatasetIndex,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<CategoryResult> {
    let mut result = CategoryResult::new(&index.category);
    for &strategy in &cfg.strategies {
        let scoring = ScoringConfig {
            strategy,
            p: cfg.p,
            passes: cfg.passes,
            seed,
        };
        let items = score_test_set(network, index, &scoring)?;
        if cfg.image_wise {
            result.insert(Column::new(strategy, false), image_wise_roc(&items)?);
        }
        if cfg.pixel_wise {
            result.insert(Column::new(strategy, true), pixel_wise_roc(&items)?);
        }
        result.previews.push((strategy, preview_items(&items)));
    }
    Ok(result)
}

/// The highest-scoring defective and clean images, kept for preview panels.
fn preview_items(items: &[ScoredItem]) -> Vec<ScoredItem> {
    let mut out = Vec::new();
    for label in [Label::Defective, Label::Clean] {
        if let Some(best) = items
            .iter()
            .filter(|s| s.label == label)
            .max_by(|a, b| a.score.total_cmp(&b.score))
        {
            out.push(best.clone());
        }
    }
    out
}
