//! Periodic cubic spline interpolation on non-uniform knots.

/// C2-continuous cubic spline through `(knot, value)` pairs that wraps with a
/// fixed period, so the curve closes on itself.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
    period: f64,
}

impl PeriodicSpline {
    /// `knots` must be strictly ascending and span less than one `period`.
    /// Returns `None` for fewer than 3 knots or an invalid knot sequence.
    pub fn new(knots: &[f64], values: &[f64], period: f64) -> Option<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n || !(period > 0.0) {
            return None;
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || !(knots[n - 1] - knots[0] < period) {
            return None;
        }
        let h: Vec<f64> = (0..n)
            .map(|i| {
                if i + 1 < n {
                    knots[i + 1] - knots[i]
                } else {
                    knots[0] + period - knots[n - 1]
                }
            })
            .collect();

        // Cyclic tridiagonal system for second derivatives, solved densely
        // (the systems here are ~20 unknowns).
        let mut a = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            let (hp, hi) = (h[prev], h[i]);
            a[i * n + prev] += hp;
            a[i * n + i] += 2.0 * (hp + hi);
            a[i * n + next] += hi;
            rhs[i] = 6.0 * ((values[next] - values[i]) / hi - (values[i] - values[prev]) / hp);
        }
        let second = solve_dense(&mut a, &mut rhs, n)?;
        Some(Self {
            knots: knots.to_vec(),
            values: values.to_vec(),
            second,
            period,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        let x0 = self.knots[0];
        let mut x = (x - x0).rem_euclid(self.period) + x0;
        if x >= x0 + self.period {
            x = x0;
        }
        // Last interval wraps from knots[n-1] to knots[0] + period.
        let i = match self.knots.partition_point(|&k| k <= x) {
            0 => n - 1,
            p => p - 1,
        };
        let next = (i + 1) % n;
        let xi = self.knots[i];
        let xn = if next == 0 {
            self.knots[0] + self.period
        } else {
            self.knots[next]
        };
        let h = xn - xi;
        let (mi, mn) = (self.second[i], self.second[next]);
        let (yi, yn) = (self.values[i], self.values[next]);
        let (l, r) = (xn - x, x - xi);
        mi * l * l * l / (6.0 * h)
            + mn * r * r * r / (6.0 * h)
            + (yi / h - mi * h / 6.0) * l
            + (yn / h - mn * h / 6.0) * r
    }
}

fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs()))?;
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn knots() -> Vec<f64> {
        vec![0.1, 0.9, 1.3, 2.2, 3.0, 3.4, 4.5, 5.1, 5.9]
    }

    #[test]
    fn interpolates_knots_and_closes() {
        let k = knots();
        let v: Vec<f64> = k.iter().map(|x| 2.0 + x.sin() * 0.5).collect();
        let s = PeriodicSpline::new(&k, &v, TAU).unwrap();
        for (x, y) in k.iter().zip(&v) {
            assert!((s.eval(*x) - y).abs() < 1e-12);
            assert!((s.eval(*x + TAU) - y).abs() < 1e-9);
        }
        // Continuity across the wrap point.
        let end = k[0] + TAU;
        assert!((s.eval(end - 1e-9) - s.eval(k[0])).abs() < 1e-6);
    }

    #[test]
    fn reproduces_constants_and_is_c1_at_knots() {
        let k = knots();
        let s = PeriodicSpline::new(&k, &vec![3.0; k.len()], TAU).unwrap();
        for i in 0..200 {
            let x = i as f64 * TAU / 200.0;
            assert!((s.eval(x) - 3.0).abs() < 1e-12);
        }
        let v: Vec<f64> = k.iter().map(|x| (2.0 * x).cos()).collect();
        let s = PeriodicSpline::new(&k, &v, TAU).unwrap();
        let eps = 1e-6;
        for &x in &k[1..] {
            let left = (s.eval(x) - s.eval(x - eps)) / eps;
            let right = (s.eval(x + eps) - s.eval(x)) / eps;
            assert!((left - right).abs() < 1e-4, "slope jump at {x}");
        }
    }

    #[test]
    fn periodic_trig_is_approximated() {
        let k: Vec<f64> = (0..20).map(|i| i as f64 * TAU / 20.0).collect();
        let v: Vec<f64> = k.iter().map(|x| x.sin()).collect();
        let s = PeriodicSpline::new(&k, &v, TAU).unwrap();
        for i in 0..500 {
            let x = i as f64 * TAU / 500.0;
            assert!((s.eval(x) - x.sin()).abs() < 1e-3);
        }
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(PeriodicSpline::new(&[0.0, 1.0], &[1.0, 2.0], TAU).is_none());
        assert!(PeriodicSpline::new(&[0.0, 1.0, 1.0], &[1.0; 3], TAU).is_none());
        assert!(PeriodicSpline::new(&[0.0, 1.0, 7.0], &[1.0; 3], TAU).is_none());
    }
}
