//! Per-category AUC tables with texture, object and global means.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::plot::{preview_panel, roc_image, save_rgb};
use super::{RocResult, ScoredItem};
use crate::dataset::MVTEC_OBJECTS;
use crate::detection::MapKind;
use crate::error::{Error, Result};

/// One AUC column: a strategy at image or pixel granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Column {
    pub strategy: MapKind,
    pub pixel_wise: bool,
}

impl Column {
    pub fn new(strategy: MapKind, pixel_wise: bool) -> Self {
        Self { strategy, pixel_wise }
    }

    pub fn label(&self) -> String {
        format!(
            "{}_{}",
            self.strategy.name(),
            if self.pixel_wise { "pixel" } else { "image" }
        )
    }
}

/// Evaluation outcome for one category.
#[derive(Debug, Clone)]
pub struct CategoryResult {
    pub category: String,
    pub rocs: BTreeMap<Column, RocResult>,
    /// Highest-scoring defective and clean test images per strategy.
    pub previews: Vec<(MapKind, Vec<ScoredItem>)>,
}

impl CategoryResult {
    pub fn new(category: &str) -> Self {
        Self {
            category: category.to_string(),
            rocs: BTreeMap::new(),
            previews: Vec::new(),
        }
    }

    pub fn insert(&mut self, column: Column, roc: RocResult) {
        self.rocs.insert(column, roc);
    }

    pub fn auc(&self, column: Column) -> Option<f64> {
        self.rocs.get(&column).map(|r| r.auc)
    }

    pub fn is_object(&self) -> bool {
        MVTEC_OBJECTS.contains(&self.category.as_str())
    }
}

/// Serializable form of a [`CategoryResult`]: curves are thinned and
/// preview images dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedCategory {
    pub category: String,
    pub rocs: Vec<(Column, RocResult)>,
}

/// Curve points kept per saved ROC.
pub const SAVED_ROC_POINTS: usize = 1024;

impl From<&CategoryResult> for SavedCategory {
    fn from(r: &CategoryResult) -> Self {
        Self {
            category: r.category.clone(),
            rocs: r
                .rocs
                .iter()
                .map(|(c, roc)| (*c, roc.thinned(SAVED_ROC_POINTS)))
                .collect(),
        }
    }
}

impl From<SavedCategory> for CategoryResult {
    fn from(s: SavedCategory) -> Self {
        Self {
            category: s.category,
            rocs: s.rocs.into_iter().collect(),
            previews: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    /// Aligned with [`EvalReport::columns`].
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub columns: Vec<Column>,
    pub rows: Vec<ReportRow>,
    pub texture_mean: ReportRow,
    pub object_mean: ReportRow,
    pub global_mean: ReportRow,
}

fn mean_row(name: &str, rows: &[&ReportRow], width: usize) -> ReportRow {
    let cells = (0..width)
        .map(|c| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.cells[c]).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();
    ReportRow {
        name: name.to_string(),
        cells,
    }
}

impl EvalReport {
    /// Categories not in the MVTec object list count as textures.
    pub fn from_results(results: &[CategoryResult]) -> Result<Self> {
        if results.is_empty() {
            return Err(Error::Config("report needs at least one evaluated category".into()));
        }
        let mut columns: Vec<Column> = results.iter().flat_map(|r| r.rocs.keys().copied()).collect();
        columns.sort();
        columns.dedup();
        let rows: Vec<ReportRow> = results
            .iter()
            .map(|r| ReportRow {
                name: r.category.clone(),
                cells: columns.iter().map(|&c| r.auc(c)).collect(),
            })
            .collect();
        let (objects, textures): (Vec<_>, Vec<_>) = rows.iter().zip(results).partition(|(_, r)| r.is_object());
        let objects: Vec<&ReportRow> = objects.into_iter().map(|(row, _)| row).collect();
        let textures: Vec<&ReportRow> = textures.into_iter().map(|(row, _)| row).collect();
        let all: Vec<&ReportRow> = rows.iter().collect();
        let w = columns.len();
        Ok(Self {
            texture_mean: mean_row("mean_textures", &textures, w),
            object_mean: mean_row("mean_objects", &objects, w),
            global_mean: mean_row("mean_all", &all, w),
            columns,
            rows,
        })
    }

    fn all_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows
            .iter()
            .chain([&self.texture_mean, &self.object_mean, &self.global_mean])
    }

    /// Empty cells are written as blank fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category");
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.label());
        }
        out.push('\n');
        for row in self.all_rows() {
            out.push_str(&row.name);
            for cell in &row.cells {
                out.push(',');
                if let Some(v) = cell {
                    let _ = write!(out, "{v:.6}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width table; empty cells show as `-`.
    pub fn to_text(&self) -> String {
        let name_w = self.all_rows().map(|r| r.name.len()).max().unwrap_or(8).max(8);
        let labels: Vec<String> = self.columns.iter().map(Column::label).collect();
        let mut out = format!("{:<name_w$}", "category");
        for l in &labels {
            let _ = write!(out, "  {:>w$}", l, w = l.len().max(6));
        }
        out.push('\n');
        let rule = out.trim_end().len();
        for (i, row) in self.all_rows().enumerate() {
            if i == self.rows.len() {
                out.push_str(&"-".repeat(rule));
                out.push('\n');
            }
            let _ = write!(out, "{:<name_w$}", row.name);
            for (cell, l) in row.cells.iter().zip(&labels) {
                let w = l.len().max(6);
                match cell {
                    Some(v) => {
                        let _ = write!(out, "  {v:>w$.3}");
                    }
                    None => {
                        let _ = write!(out, "  {:>w$}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the report and writes `<prefix>report.csv`, `<prefix>report.txt`,
/// one ROC plot per category and column, and preview panels (input, anomaly
/// map, ground truth) under `out_dir`.
pub fn render_report(results: &[CategoryResult], out_dir: &Path, prefix: &str) -> Result<EvalReport> {
    let report = EvalReport::from_results(results)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: String, text: String| {
        let p = out_dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write(format!("{prefix}report.csv"), report.to_csv())?;
    write(format!("{prefix}report.txt"), report.to_text())?;
    write(
        format!("{prefix}report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    for r in results {
        for (col, roc) in &r.rocs {
            let name = format!("{prefix}roc_{}_{}.png", r.category, col.label());
            save_rgb(&roc_image(&roc.points, roc.auc), &out_dir.join(name))?;
        }
        for (strategy, items) in &r.previews {
            for item in items {
                let label = if item.label.is_defective() { "defective" } else { "clean" };
                let name = format!("{prefix}preview_{}_{}_{label}.png", r.category, strategy.name());
                let panel = preview_panel(&item.image, &item.map.preview_u8(), &item.mask);
                save_rgb(&panel, &out_dir.join(name))?;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(category: &str, auc: f64) -> CategoryResult {
        let mut r = CategoryResult::new(category);
        r.insert(
            Column::new(MapKind::Residual, false),
            RocResult {
                points: vec![(0.0, 0.0), (1.0, 1.0)],
                auc,
                n_positive: 1,
                n_negative: 1,
            },
        );
        r
    }

    #[test]
    fn means_over_rows() {
        let rep = EvalReport::from_results(&[result("grid", 0.8), result("tile", 0.9)]).unwrap();
        assert!((rep.global_mean.cells[0].unwrap() - 0.85).abs() < 1e-12);
        assert_eq!(rep.texture_mean.cells[0], rep.global_mean.cells[0]);
        assert_eq!(rep.object_mean.cells[0], None);

        let single = EvalReport::from_results(&[result("bottle", 0.7)]).unwrap();
        assert_eq!(single.global_mean.cells[0], Some(0.7));
        assert_eq!(single.object_mean.cells[0], Some(0.7));
        assert!(EvalReport::from_results(&[]).is_err());
    }

    #[test]
    fn mixed_groups() {
        let rep = EvalReport::from_results(&[result("grid", 1.0), result("screw", 0.5), result("cable", 0.7)]).unwrap();
        assert_eq!(rep.texture_mean.cells[0], Some(1.0));
        assert!((rep.object_mean.cells[0].unwrap() - 0.6).abs() < 1e-12);
        assert!((rep.global_mean.cells[0].unwrap() - 2.2 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn text_and_csv_layout() {
        let rep = EvalReport::from_results(&[result("grid", 0.8)]).unwrap();
        let csv = rep.to_csv();
        assert_eq!(csv.lines().next(), Some("category,residual_image"));
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("grid,0.800000"));
        assert!(csv.contains("mean_objects,\n"));
        let text = rep.to_text();
        assert!(text.contains("0.800"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn saved_round_trip() {
        let r = result("grid", 0.8);
        let saved = SavedCategory::from(&r);
        let json = serde_json::to_string(&saved).unwrap();
        let back: CategoryResult = serde_json::from_str::<SavedCategory>(&json).unwrap().into();
        assert_eq!(back.rocs, r.rocs);
    }

    #[test]
    fn renders_files() {
        let dir = tempfile::tempdir().unwrap();
        render_report(&[result("grid", 0.8)], dir.path(), "abc_").unwrap();
        for f in ["abc_report.csv", "abc_report.txt", "abc_report.json", "abc_roc_grid_residual_image.png"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
}
