//! Scratch: one stroked curve between two random points.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::raster::{stroke_polyline, Point};
use crate::image::{GrayImage, Mask};

/// Minimum endpoint separation in pixels; closer pairs are redrawn.
pub const MIN_ENDPOINT_DISTANCE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScratchPath {
    Line,
    Sinusoid,
    SquareRoot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scratch {
    pub start: Point,
    pub end: Point,
    pub path: ScratchPath,
    pub stroke_width: f64,
    pub color: f32,
    pub mask: Mask,
}

/// Stroke width for an image whose smaller side is `min_side`: 2 px at 256,
/// proportional otherwise, never below one pixel.
pub fn stroke_width(min_side: usize) -> f64 {
    (2.0 * min_side as f64 / 256.0).max(1.0)
}

pub fn sample_scratch<R: Rng + ?Sized>(rng: &mut R, height: usize, width: usize) -> Scratch {
    let scale = height.min(width) as f64 / 256.0;
    let (start, end) = loop {
        let a = Point::new(rng.random_range(0.0..height as f64), rng.random_range(0.0..width as f64));
        let b = Point::new(rng.random_range(0.0..height as f64), rng.random_range(0.0..width as f64));
        if a.dist(b) >= MIN_ENDPOINT_DISTANCE {
            break (a, b);
        }
    };
    let path = match rng.random_range(0..3) {
        0 => ScratchPath::Line,
        1 => ScratchPath::Sinusoid,
        _ => ScratchPath::SquareRoot,
    };
    let (d_row, d_col) = (end.row - start.row, end.col - start.col);
    let length = start.dist(end);
    let samples = (length * 2.0).ceil() as usize + 2;

    let points: Vec<Point> = match path {
        ScratchPath::Line => vec![start, end],
        ScratchPath::Sinusoid => {
            let amplitude = rng.random_range(4.0..=24.0) * scale;
            let periods = rng.random_range(1..=3) as f64;
            // Unit normal to the chord.
            let (n_row, n_col) = (-d_col / length, d_row / length);
            (0..=samples)
                .map(|s| {
                    let t = s as f64 / samples as f64;
                    let off = amplitude * (TAU * periods * t).sin();
                    Point::new(start.row + t * d_row + off * n_row, start.col + t * d_col + off * n_col)
                })
                .collect()
        }
        ScratchPath::SquareRoot => {
            let sqrt_on_rows = rng.random_bool(0.5);
            (0..=samples)
                .map(|s| {
                    let t = s as f64 / samples as f64;
                    if sqrt_on_rows {
                        Point::new(start.row + t.sqrt() * d_row, start.col + t * d_col)
                    } else {
                        Point::new(start.row + t * d_row, start.col + t.sqrt() * d_col)
                    }
                })
                .collect()
        }
    };
    let color = rng.random_range(0.0f32..=1.0);
    let stroke = stroke_width(height.min(width));
    let mut mask = Mask::new(height, width);
    stroke_polyline(&mut mask, &points, stroke);
    Scratch {
        start,
        end,
        path,
        stroke_width: stroke,
        color,
        mask,
    }
}

pub fn paint_scratch<R: Rng + ?Sized>(rng: &mut R, image: &GrayImage) -> (GrayImage, Scratch) {
    let scratch = sample_scratch(rng, image.height(), image.width());
    let mut out = image.clone();
    super::fill_masked(&mut out, &scratch.mask, scratch.color);
    (out, scratch)
}
