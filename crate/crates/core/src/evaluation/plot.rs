//! Small raster renderings: ROC curves and side-by-side preview panels.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::image::{GrayImage, Mask};

const PLOT_SIZE: u32 = 256;
const MARGIN: u32 = 16;

fn put(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

fn line(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), color: Rgb<u8>) {
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        put(img, (x0 + t * (x1 - x0)).round() as i64, (y0 + t * (y1 - y0)).round() as i64, color);
    }
}

/// ROC curve on a unit square with the chance diagonal and a bar whose
/// length is the AUC along the top edge.
pub fn roc_image(points: &[(f64, f64)], auc: f64) -> RgbImage {
    let mut img = RgbImage::from_pixel(PLOT_SIZE, PLOT_SIZE, Rgb([255, 255, 255]));
    let span = (PLOT_SIZE - 2 * MARGIN) as f64;
    let to_px = |(fpr, tpr): (f64, f64)| (MARGIN as f64 + fpr * span, MARGIN as f64 + (1.0 - tpr) * span);
    let axis = Rgb([0, 0, 0]);
    line(&mut img, to_px((0.0, 0.0)), to_px((1.0, 0.0)), axis);
    line(&mut img, to_px((0.0, 0.0)), to_px((0.0, 1.0)), axis);
    line(&mut img, to_px((0.0, 0.0)), to_px((1.0, 1.0)), Rgb([190, 190, 190]));
    // Thin out very long pixel-level curves; consecutive points closer than a
    // pixel draw the same line.
    let mut last: Option<(f64, f64)> = None;
    for (i, &p) in points.iter().enumerate() {
        let q = to_px(p);
        if let Some(prev) = last {
            let far = (q.0 - prev.0).abs() >= 1.0 || (q.1 - prev.1).abs() >= 1.0;
            if far || i + 1 == points.len() {
                line(&mut img, prev, q, Rgb([200, 30, 30]));
                last = Some(q);
            }
        } else {
            last = Some(q);
        }
    }
    let bar = (auc.clamp(0.0, 1.0) * span).round() as i64;
    for dy in 4..8 {
        for x in 0..bar {
            put(&mut img, MARGIN as i64 + x, dy, Rgb([30, 30, 200]));
        }
    }
    img
}

fn gray_tile(values: &[u8], w: usize, h: usize) -> RgbImage {
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = values[y as usize * w + x as usize];
        Rgb([v, v, v])
    })
}

/// Horizontal strip of equally sized gray tiles separated by a 2 px gap.
pub fn panel(tiles: &[(Vec<u8>, usize, usize)]) -> RgbImage {
    let gap = 2u32;
    let height = tiles.iter().map(|t| t.2 as u32).max().unwrap_or(1);
    let width = tiles.iter().map(|t| t.1 as u32 + gap).sum::<u32>().saturating_sub(gap).max(1);
    let mut out = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let mut x0 = 0;
    for (values, w, h) in tiles {
        image::imageops::replace(&mut out, &gray_tile(values, *w, *h), x0 as i64, 0);
        x0 += *w as u32 + gap;
    }
    out
}

/// Input, min-max scaled anomaly map and ground truth side by side.
pub fn preview_panel(input: &GrayImage, map_preview: &[u8], mask: &Mask) -> RgbImage {
    let (h, w) = input.dims();
    let mask_bytes = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    panel(&[(input.to_u8(), w, h), (map_preview.to_vec(), w, h), (mask_bytes, w, h)])
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    img.save(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roc_plot_marks_curve() {
        let img = roc_image(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)], 1.0);
        assert_eq!(img.dimensions(), (PLOT_SIZE, PLOT_SIZE));
        // Top-left corner of the unit square lies on the curve.
        assert_eq!(img.get_pixel(MARGIN, MARGIN), &Rgb([200, 30, 30]));
    }

    #[test]
    fn panel_layout() {
        let input = GrayImage::filled(16, 16, 1.0).unwrap();
        let p = preview_panel(&input, &[0u8; 256], &Mask::full(16, 16));
        assert_eq!(p.dimensions(), (52, 16));
        assert_eq!(p.get_pixel(0, 0), &Rgb([255, 255, 255]));
        assert_eq!(p.get_pixel(18, 0), &Rgb([0, 0, 0]));
        assert_eq!(p.get_pixel(17, 0), &Rgb([255, 255, 255]));
    }
}
