//! Drops: a cluster of ten small discs of independent gray levels.

use std::f64::consts::TAU;

use rand::Rng;

use super::raster::{fill_disc, Point};
use crate::image::{GrayImage, Mask};

pub const DROP_COUNT: usize = 10;
pub const DIAMETER_MIN_FRACTION: f64 = 0.01;
pub const DIAMETER_MAX_FRACTION: f64 = 0.02;
/// Each new drop lands within this many of its own diameters of the running
/// centroid of the previous drops.
pub const CLUSTER_SPREAD: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Drop {
    pub center: Point,
    pub diameter: f64,
    pub color: f32,
    pub mask: Mask,
}

impl Drop {
    pub fn intersects(&self, other: &Drop) -> bool {
        self.center.dist(other.center) < (self.diameter + other.diameter) / 2.0
    }
}

pub fn sample_drops<R: Rng + ?Sized>(rng: &mut R, height: usize, width: usize) -> Vec<Drop> {
    let d = height.min(width) as f64;
    let mut drops: Vec<Drop> = Vec::with_capacity(DROP_COUNT);
    let (mut sum_row, mut sum_col) = (0.0, 0.0);
    for i in 0..DROP_COUNT {
        let diameter = rng.random_range(DIAMETER_MIN_FRACTION * d..=DIAMETER_MAX_FRACTION * d);
        let center = if i == 0 {
            Point::new(rng.random_range(0.0..height as f64), rng.random_range(0.0..width as f64))
        } else {
            let centroid = (sum_row / i as f64, sum_col / i as f64);
            // Uniform over the disc of radius CLUSTER_SPREAD * diameter.
            let rho = CLUSTER_SPREAD * diameter * rng.random_range(0.0f64..1.0).sqrt();
            let theta = rng.random_range(0.0..TAU);
            Point::new(
                (centroid.0 + rho * theta.sin()).clamp(0.0, height as f64 - 1e-6),
                (centroid.1 + rho * theta.cos()).clamp(0.0, width as f64 - 1e-6),
            )
        };
        sum_row += center.row;
        sum_col += center.col;
        let color = rng.random_range(0.0f32..=1.0);
        let mut mask = Mask::new(height, width);
        fill_disc(&mut mask, center, diameter / 2.0);
        drops.push(Drop {
            center,
            diameter,
            color,
            mask,
        });
    }
    drops
}

pub fn paint_drops<R: Rng + ?Sized>(rng: &mut R, image: &GrayImage) -> (GrayImage, Mask, Vec<Drop>) {
    let drops = sample_drops(rng, image.height(), image.width());
    let mut out = image.clone();
    let mut union = Mask::new(image.height(), image.width());
    for drop in &drops {
        super::fill_masked(&mut out, &drop.mask, drop.color);
        union.union_with(&drop.mask);
    }
    (out, union, drops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, SeedTree};

    #[test]
    fn diameters_in_range_at_256() {
        let tree = SeedTree::new(4);
        for i in 0..100 {
            let drops = sample_drops(&mut tree.stream(Purpose::Corruption, i, 0), 256, 300);
            assert_eq!(drops.len(), DROP_COUNT);
            for d in &drops {
                assert!((2.56..=5.12).contains(&d.diameter));
                assert!(d.mask.any());
            }
        }
    }
}
