use rand::Rng;

use super::{FeatureMap, Real};

pub fn leaky_relu_inplace<T: Real>(x: &mut FeatureMap<T>, slope: T) {
    for v in &mut x.data {
        if *v < T::zero() {
            *v *= slope;
        }
    }
}

/// Backpropagates through leaky ReLU given its *output*; the sign of the
/// output equals the sign of the input for a positive slope.
pub fn leaky_relu_backward<T: Real>(grad: &mut FeatureMap<T>, output: &FeatureMap<T>, slope: T) {
    for (g, &y) in grad.data.iter_mut().zip(&output.data) {
        if y <= T::zero() {
            *g *= slope;
        }
    }
}

pub fn sigmoid_inplace<T: Real>(x: &mut FeatureMap<T>) {
    for v in &mut x.data {
        *v = T::one() / (T::one() + (-*v).exp());
    }
}

pub fn sigmoid_backward<T: Real>(grad: &mut FeatureMap<T>, output: &FeatureMap<T>) {
    for (g, &y) in grad.data.iter_mut().zip(&output.data) {
        *g *= y * (T::one() - y);
    }
}

/// Nearest-neighbour upsampling by a factor of two.
pub fn upsample2x<T: Real>(x: &FeatureMap<T>) -> FeatureMap<T> {
    let (h, w) = (x.height * 2, x.width * 2);
    let mut y = FeatureMap::zeros(x.channels, h, w);
    for c in 0..x.channels {
        for r in 0..h {
            let src = &x.data[(c * x.height + r / 2) * x.width..][..x.width];
            let dst = &mut y.data[(c * h + r) * w..][..w];
            for (col, v) in dst.iter_mut().enumerate() {
                *v = src[col / 2];
            }
        }
    }
    y
}

/// Adjoint of [`upsample2x`]: sums each 2x2 block.
pub fn upsample2x_backward<T: Real>(dy: &FeatureMap<T>) -> FeatureMap<T> {
    let (h, w) = (dy.height / 2, dy.width / 2);
    let mut dx = FeatureMap::zeros(dy.channels, h, w);
    for c in 0..dy.channels {
        for r in 0..dy.height {
            let src = &dy.data[(c * dy.height + r) * dy.width..][..dy.width];
            let dst = &mut dx.data[(c * h + r / 2) * w..][..w];
            for (col, &v) in src.iter().enumerate() {
                dst[col / 2] += v;
            }
        }
    }
    dx
}

/// Per-channel inverted-dropout factors: 0 with probability `rate`,
/// `1 / (1 - rate)` otherwise.
pub fn spatial_dropout_factors<T: Real, R: Rng + ?Sized>(channels: usize, rate: f64, rng: &mut R) -> Vec<T> {
    let keep = T::lit(1.0 / (1.0 - rate));
    (0..channels)
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
        .collect()
}

pub fn scale_channels<T: Real>(x: &mut FeatureMap<T>, factors: &[T]) {
    let plane = x.plane();
    for (c, &f) in factors.iter().enumerate() {
        x.data[c * plane..(c + 1) * plane].iter_mut().for_each(|v| *v *= f);
    }
}
