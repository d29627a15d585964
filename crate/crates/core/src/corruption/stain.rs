//! The Stain model: an irregular filled ellipse of random gray level.
//!
//! Twenty control points are placed around the border of a randomly sized and
//! rotated ellipse, one per angular sector, each pushed radially by up to
//! +/-25%. The boundary is the closed cubic spline through those points,
//! sampled at [`BOUNDARY_SAMPLES`] positions and scanline-filled.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use super::raster::{fill_polygon, Point};
use super::spline::PeriodicSpline;
use crate::error::{Error, Result};
use crate::image::{GrayImage, Mask, MIN_SIDE};

pub const CONTROL_POINTS: usize = 20;
/// Semi-axis range as a fraction of the smaller image side.
pub const AXIS_MIN_FRACTION: f64 = 0.01;
pub const AXIS_MAX_FRACTION: f64 = 0.12;
/// Maximum relative radial displacement of a control point.
pub const RADIAL_JITTER: f64 = 0.25;
pub const BOUNDARY_SAMPLES: usize = 720;

#[derive(Debug, Clone, PartialEq)]
pub struct StainShape {
    /// `(row, col)` in continuous pixel coordinates.
    pub center: (f64, f64),
    /// Semi-axes `(a, b)` in pixels; `a` lies along `rotation`.
    pub semi_axes: (f64, f64),
    /// Orientation of the `a` axis, radians in `[0, pi)`.
    pub rotation: f64,
    /// `(angle, radius)` pairs, angles strictly ascending in `[0, 2pi)`.
    pub control_points: Vec<(f64, f64)>,
    pub color: f32,
    pub raster_mask: Mask,
}

impl StainShape {
    /// Radius of the underlying (unperturbed) ellipse at polar angle `phi`.
    pub fn ellipse_radius(&self, phi: f64) -> f64 {
        ellipse_radius(self.semi_axes, self.rotation, phi)
    }
}

fn ellipse_radius((a, b): (f64, f64), rotation: f64, phi: f64) -> f64 {
    let psi = phi - rotation;
    a * b / ((b * psi.cos()).powi(2) + (a * psi.sin()).powi(2)).sqrt()
}

/// Draws one stain shape for an image of the given size.
pub fn sample_stain<R: Rng + ?Sized>(rng: &mut R, height: usize, width: usize) -> Result<StainShape> {
    if height < MIN_SIDE || width < MIN_SIDE {
        return Err(Error::DegenerateImage { height, width });
    }
    let d = height.min(width) as f64;
    let center = (
        rng.random_range(0.0..height as f64),
        rng.random_range(0.0..width as f64),
    );
    let axis_range = AXIS_MIN_FRACTION * d..=AXIS_MAX_FRACTION * d;
    let semi_axes = (
        rng.random_range(axis_range.clone()),
        rng.random_range(axis_range),
    );
    let rotation = rng.random_range(0.0..PI);

    let sector = TAU / CONTROL_POINTS as f64;
    let control_points: Vec<(f64, f64)> = (0..CONTROL_POINTS)
        .map(|k| {
            let angle = (k as f64 + rng.random_range(0.0..1.0)) * sector;
            let eta = rng.random_range(-RADIAL_JITTER..=RADIAL_JITTER);
            (angle, ellipse_radius(semi_axes, rotation, angle) * (1.0 + eta))
        })
        .collect();
    let color = rng.random_range(0.0f32..=1.0);

    let raster_mask = rasterize(height, width, center, &control_points);
    Ok(StainShape {
        center,
        semi_axes,
        rotation,
        control_points,
        color,
        raster_mask,
    })
}

/// Closed boundary polygon of the periodic cubic spline through
/// `control_points`, interpolated in image coordinates with centripetal
/// (square-root chord length) knot spacing.
pub fn boundary_polygon(center: (f64, f64), control_points: &[(f64, f64)]) -> Vec<Point> {
    let rows: Vec<f64> = control_points.iter().map(|&(phi, r)| r * phi.sin()).collect();
    let cols: Vec<f64> = control_points.iter().map(|&(phi, r)| r * phi.cos()).collect();
    let n = control_points.len();
    let mut knots = Vec::with_capacity(n);
    let mut t = 0.0;
    for i in 0..n {
        knots.push(t);
        let j = (i + 1) % n;
        let chord = (rows[j] - rows[i]).hypot(cols[j] - cols[i]);
        t += chord.sqrt().max(1e-9);
    }
    let period = t;
    let spline_row = PeriodicSpline::new(&knots, &rows, period).expect("knots strictly ascending");
    let spline_col = PeriodicSpline::new(&knots, &cols, period).expect("knots strictly ascending");
    (0..BOUNDARY_SAMPLES)
        .map(|s| {
            let t = s as f64 * period / BOUNDARY_SAMPLES as f64;
            Point::new(center.0 + spline_row.eval(t), center.1 + spline_col.eval(t))
        })
        .collect()
}

fn rasterize(height: usize, width: usize, center: (f64, f64), control_points: &[(f64, f64)]) -> Mask {
    let mut mask = Mask::new(height, width);
    fill_polygon(&mut mask, &boundary_polygon(center, control_points));
    // Thin lobes can rasterize as separate islands; keeping the component that
    // holds the center pixel guarantees a single nonempty 4-connected region.
    mask.retain_component(center.0 as usize, center.1 as usize);
    mask
}

/// Paints a freshly sampled stain onto `image`; returns the painted image and
/// the shape.
pub fn paint_stain<R: Rng + ?Sized>(rng: &mut R, image: &GrayImage) -> Result<(GrayImage, StainShape)> {
    let shape = sample_stain(rng, image.height(), image.width())?;
    let mut out = image.clone();
    super::fill_masked(&mut out, &shape.raster_mask, shape.color);
    Ok((out, shape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, SeedTree};

    #[test]
    fn shape_invariants() {
        let tree = SeedTree::new(9);
        for i in 0..200 {
            let mut rng = tree.stream(Purpose::Corruption, i, 0);
            let s = sample_stain(&mut rng, 256, 256).unwrap();
            assert!(s.semi_axes.0 >= 2.56 && s.semi_axes.0 <= 30.72);
            assert!(s.semi_axes.1 >= 2.56 && s.semi_axes.1 <= 30.72);
            assert!((0.0..PI).contains(&s.rotation));
            assert_eq!(s.control_points.len(), CONTROL_POINTS);
            assert!(s.control_points.windows(2).all(|w| w[1].0 > w[0].0));
            assert!(s.control_points.iter().all(|p| p.0 >= 0.0 && p.0 < TAU && p.1 > 0.0));
            assert!(s.raster_mask.any());
            assert_eq!(s.raster_mask.component_count(), 1);
            assert!((0.0..=1.0).contains(&s.color));
        }
    }

    #[test]
    fn control_points_hug_the_ellipse() {
        let mut rng = SeedTree::new(1).stream(Purpose::Corruption, 0, 0);
        let s = sample_stain(&mut rng, 128, 200).unwrap();
        for &(phi, r) in &s.control_points {
            let ratio = r / s.ellipse_radius(phi);
            assert!((1.0 - RADIAL_JITTER..=1.0 + RADIAL_JITTER).contains(&ratio));
        }
    }

    #[test]
    fn rejects_degenerate_sizes() {
        let mut rng = SeedTree::new(1).stream(Purpose::Corruption, 0, 0);
        assert!(matches!(
            sample_stain(&mut rng, 15, 256),
            Err(Error::DegenerateImage { .. })
        ));
    }

    #[test]
    fn same_stream_same_raster() {
        let tree = SeedTree::new(77);
        let a = sample_stain(&mut tree.stream(Purpose::Corruption, 5, 1), 256, 256).unwrap();
        let b = sample_stain(&mut tree.stream(Purpose::Corruption, 5, 1), 256, 256).unwrap();
        assert_eq!(a, b);
    }
}
