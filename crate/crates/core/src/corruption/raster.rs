//! Pixel-center rasterization of polygons, discs and strokes.
//!
//! Pixel `(row, col)` covers `[row, row + 1) x [col, col + 1)`; a primitive
//! covers the pixel when it contains the pixel center `(row + 0.5, col + 0.5)`.

use crate::image::Mask;

/// A point in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub row: f64,
    pub col: f64,
}

impl Point {
    pub fn new(row: f64, col: f64) -> Self {
        Self { row, col }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.row - other.row).hypot(self.col - other.col)
    }
}

/// Even-odd scanline fill of a closed polygon (last vertex connects to first).
pub fn fill_polygon(mask: &mut Mask, vertices: &[Point]) {
    if vertices.len() < 3 {
        return;
    }
    let (h, w) = mask.dims();
    let min_row = vertices.iter().map(|p| p.row).fold(f64::INFINITY, f64::min);
    let max_row = vertices.iter().map(|p| p.row).fold(f64::NEG_INFINITY, f64::max);
    let r_start = (min_row - 0.5).ceil().max(0.0) as usize;
    let r_end = ((max_row - 0.5).floor() + 1.0).clamp(0.0, h as f64) as usize;
    let mut crossings = Vec::new();
    for r in r_start..r_end {
        let y = r as f64 + 0.5;
        crossings.clear();
        for (i, &p) in vertices.iter().enumerate() {
            let q = vertices[(i + 1) % vertices.len()];
            if (p.row <= y && y < q.row) || (q.row <= y && y < p.row) {
                let t = (y - p.row) / (q.row - p.row);
                crossings.push(p.col + t * (q.col - p.col));
            }
        }
        crossings.sort_by(f64::total_cmp);
        for pair in crossings.chunks_exact(2) {
            let c0 = (pair[0] - 0.5).ceil().max(0.0);
            let c1 = (pair[1] - 0.5).ceil().min(w as f64);
            let (c0, c1) = (c0 as usize, c1.max(0.0) as usize);
            for c in c0..c1 {
                mask.set(r, c, true);
            }
        }
    }
}

/// Marks every pixel whose center lies within `radius` of `center`, plus the
/// pixel containing `center` when it falls inside the image.
pub fn fill_disc(mask: &mut Mask, center: Point, radius: f64) {
    let (h, w) = mask.dims();
    let r0 = (center.row - radius - 0.5).floor().max(0.0) as usize;
    let r1 = ((center.row + radius + 0.5).ceil().max(0.0) as usize).min(h);
    let c0 = (center.col - radius - 0.5).floor().max(0.0) as usize;
    let c1 = ((center.col + radius + 0.5).ceil().max(0.0) as usize).min(w);
    let r2 = radius * radius;
    for r in r0..r1 {
        for c in c0..c1 {
            let dr = r as f64 + 0.5 - center.row;
            let dc = c as f64 + 0.5 - center.col;
            if dr * dr + dc * dc <= r2 {
                mask.set(r, c, true);
            }
        }
    }
    if let Some((r, c)) = containing_pixel(center, h, w) {
        mask.set(r, c, true);
    }
}

/// Strokes a polyline with a round brush of the given width.
pub fn stroke_polyline(mask: &mut Mask, points: &[Point], width: f64) {
    let radius = width / 2.0;
    for seg in points.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let steps = (a.dist(b) / 0.25).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let p = Point::new(a.row + t * (b.row - a.row), a.col + t * (b.col - a.col));
            fill_disc(mask, p, radius);
        }
    }
    if let [only] = points {
        fill_disc(mask, *only, radius);
    }
}

pub fn containing_pixel(p: Point, h: usize, w: usize) -> Option<(usize, usize)> {
    if p.row >= 0.0 && p.col >= 0.0 && p.row < h as f64 && p.col < w as f64 {
        Some((p.row as usize, p.col as usize))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_fill_counts_pixel_centers() {
        let mut m = Mask::new(16, 16);
        let sq = [
            Point::new(2.0, 2.0),
            Point::new(2.0, 6.0),
            Point::new(6.0, 6.0),
            Point::new(6.0, 2.0),
        ];
        fill_polygon(&mut m, &sq);
        assert_eq!(m.count(), 16);
        assert!(m.get(2, 2) && m.get(5, 5) && !m.get(6, 6) && !m.get(1, 2));
    }

    #[test]
    fn polygon_is_clipped_to_frame() {
        let mut m = Mask::new(16, 16);
        let tri = [
            Point::new(-10.0, -10.0),
            Point::new(-10.0, 40.0),
            Point::new(40.0, -10.0),
        ];
        fill_polygon(&mut m, &tri);
        assert!(m.get(0, 0));
        assert!(!m.get(15, 15));
    }

    #[test]
    fn disc_area_is_close_to_pi_r2() {
        let mut m = Mask::new(64, 64);
        fill_disc(&mut m, Point::new(32.0, 32.0), 10.0);
        let area = std::f64::consts::PI * 100.0;
        assert!((m.count() as f64 - area).abs() < 0.05 * area);
        let mut tiny = Mask::new(16, 16);
        fill_disc(&mut tiny, Point::new(3.1, 3.9), 0.2);
        assert_eq!(tiny.count(), 1);
        assert!(tiny.get(3, 3));
    }
}
