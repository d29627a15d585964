use serde::{Deserialize, Serialize};

use super::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept per parameter group, in the
/// order the groups are passed to [`Adam::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step_count: u64,
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, group_sizes: &[usize]) -> Self {
        Self {
            config,
            step_count: 0,
            first: group_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: group_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]], lr: f64) {
        assert_eq!(params.len(), self.first.len(), "adam: parameter groups");
        self.step_count += 1;
        let t = self.step_count as i32;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (ob1, ob2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
        let step = T::lit(lr / bc1);
        let inv_bc2 = T::lit(1.0 / bc2);
        let eps = T::lit(c.epsilon);
        for (g_idx, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first[g_idx];
            let v = &mut self.second[g_idx];
            for i in 0..p.len() {
                m[i] = b1 * m[i] + ob1 * g[i];
                v[i] = b2 * v[i] + ob2 * g[i] * g[i];
                p[i] -= step * m[i] / ((v[i] * inv_bc2).sqrt() + eps);
            }
        }
    }
}

/// Rescales all gradient groups so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut [&mut [T]], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|&v| {
            let v = v.to_f64().unwrap_or(f64::NAN);
            v * v
        })
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm.is_finite() {
        let scale = T::lit(max_norm / norm);
        grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v *= scale));
    }
    norm
}
