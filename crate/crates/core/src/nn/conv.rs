//! Zero-padded 2-D convolution, lowered to GEMM over im2col row blocks.

use rand::Rng;

use super::{gemm, FeatureMap, Layout, Real};

/// Upper bound on im2col buffer elements per block.
const COLS_BUDGET: usize = 1 << 21;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `[out][in][kh][kw]`, row-major.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrad<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvGrad<T> {
    pub fn zeros_like(conv: &Conv2d<T>) -> Self {
        Self {
            weight: vec![T::zero(); conv.weight.len()],
            bias: vec![T::zero(); conv.bias.len()],
        }
    }

    pub fn reset(&mut self) {
        self.weight.iter_mut().for_each(|v| *v = T::zero());
        self.bias.iter_mut().for_each(|v| *v = T::zero());
    }
}

impl<T: Real> Conv2d<T> {
    /// "Same"-padded convolution (`padding = kernel / 2`) with zero weights.
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding: kernel / 2,
            weight: vec![T::zero(); out_channels * in_channels * kernel * kernel],
            bias: vec![T::zero(); out_channels],
        }
    }

    /// Fan-in scaled uniform initialization for a leaky-ReLU layer of the
    /// given negative slope; biases start at zero.
    pub fn init_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R, slope: f64) {
        let fan_in = (self.in_channels * self.kernel * self.kernel) as f64;
        let bound = (6.0 / ((1.0 + slope * slope) * fan_in)).sqrt();
        for w in &mut self.weight {
            *w = T::lit(rng.random_range(-bound..bound));
        }
        self.bias.iter_mut().for_each(|b| *b = T::zero());
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn output_dims(&self, height: usize, width: usize) -> (usize, usize) {
        let out = |n: usize| (n + 2 * self.padding - self.kernel) / self.stride + 1;
        (out(height), out(width))
    }

    fn rows_per_block(&self, out_w: usize, out_h: usize) -> usize {
        (COLS_BUDGET / (self.patch_len() * out_w).max(1)).clamp(1, out_h)
    }

    fn im2col(&self, x: &FeatureMap<T>, out_w: usize, row0: usize, rows: usize, cols: &mut [T]) {
        let (k, s, p) = (self.kernel, self.stride, self.padding as isize);
        let n = rows * out_w;
        for ci in 0..self.in_channels {
            let plane = &x.data[ci * x.plane()..(ci + 1) * x.plane()];
            for ki in 0..k {
                for kj in 0..k {
                    let base = ((ci * k + ki) * k + kj) * n;
                    let dst = &mut cols[base..base + n];
                    for r in 0..rows {
                        let iy = ((row0 + r) * s) as isize + ki as isize - p;
                        let line = &mut dst[r * out_w..(r + 1) * out_w];
                        if iy < 0 || iy >= x.height as isize {
                            line.iter_mut().for_each(|v| *v = T::zero());
                            continue;
                        }
                        let src = &plane[iy as usize * x.width..(iy as usize + 1) * x.width];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let ix = (ox * s) as isize + kj as isize - p;
                            *v = if ix < 0 || ix >= x.width as isize {
                                T::zero()
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    fn col2im_add(&self, dx: &mut FeatureMap<T>, out_w: usize, row0: usize, rows: usize, cols: &[T]) {
        let (k, s, p) = (self.kernel, self.stride, self.padding as isize);
        let n = rows * out_w;
        let (h, w) = (dx.height, dx.width);
        for ci in 0..self.in_channels {
            let plane = &mut dx.data[ci * h * w..(ci + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let base = ((ci * k + ki) * k + kj) * n;
                    for r in 0..rows {
                        let iy = ((row0 + r) * s) as isize + ki as isize - p;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let line = &cols[base + r * out_w..base + (r + 1) * out_w];
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, &v) in line.iter().enumerate() {
                            let ix = (ox * s) as isize + kj as isize - p;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += v;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &FeatureMap<T>) -> FeatureMap<T> {
        assert_eq!(x.channels, self.in_channels, "conv input channels");
        let (oh, ow) = self.output_dims(x.height, x.width);
        let mut y = FeatureMap::zeros(self.out_channels, oh, ow);
        let plane = oh * ow;
        let kk = self.patch_len();
        let block = self.rows_per_block(ow, oh);
        let mut cols = vec![T::zero(); kk * block * ow];
        let mut row0 = 0;
        while row0 < oh {
            let rows = block.min(oh - row0);
            let n = rows * ow;
            self.im2col(x, ow, row0, rows, &mut cols);
            gemm(
                self.out_channels,
                kk,
                n,
                T::one(),
                &self.weight,
                Layout::row_major(kk),
                &cols,
                Layout::row_major(n),
                T::zero(),
                &mut y.data,
                Layout {
                    offset: row0 * ow,
                    row_stride: plane,
                    col_stride: 1,
                },
            );
            row0 += rows;
        }
        for (co, &b) in self.bias.iter().enumerate() {
            y.data[co * plane..(co + 1) * plane].iter_mut().for_each(|v| *v += b);
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and, when `need_input_grad`,
    /// returns the gradient with respect to `x`.
    pub fn backward(
        &self,
        x: &FeatureMap<T>,
        dy: &FeatureMap<T>,
        grad: &mut ConvGrad<T>,
        need_input_grad: bool,
    ) -> Option<FeatureMap<T>> {
        let (oh, ow) = self.output_dims(x.height, x.width);
        assert_eq!(dy.shape(), (self.out_channels, oh, ow), "conv grad shape");
        let plane = oh * ow;
        let kk = self.patch_len();
        let block = self.rows_per_block(ow, oh);
        let mut cols = vec![T::zero(); kk * block * ow];
        let mut dcols = if need_input_grad {
            vec![T::zero(); kk * block * ow]
        } else {
            Vec::new()
        };
        let mut dx = need_input_grad.then(|| FeatureMap::zeros(x.channels, x.height, x.width));

        for (co, gb) in grad.bias.iter_mut().enumerate() {
            *gb += dy.data[co * plane..(co + 1) * plane].iter().copied().sum::<T>();
        }

        let mut row0 = 0;
        while row0 < oh {
            let rows = block.min(oh - row0);
            let n = rows * ow;
            let dy_block = Layout {
                offset: row0 * ow,
                row_stride: plane,
                col_stride: 1,
            };
            self.im2col(x, ow, row0, rows, &mut cols);
            // dW (out x kk) += dY_block (out x n) * cols^T (n x kk)
            gemm(
                self.out_channels,
                n,
                kk,
                T::one(),
                &dy.data,
                dy_block,
                &cols,
                Layout::col_major(n),
                T::one(),
                &mut grad.weight,
                Layout::row_major(kk),
            );
            if let Some(dx) = dx.as_mut() {
                // dcols (kk x n) = W^T (kk x out) * dY_block (out x n)
                gemm(
                    kk,
                    self.out_channels,
                    n,
                    T::one(),
                    &self.weight,
                    Layout::col_major(kk),
                    &dy.data,
                    dy_block,
                    T::zero(),
                    &mut dcols,
                    Layout::row_major(n),
                );
                self.col2im_add(dx, ow, row0, rows, &dcols);
            }
            row0 += rows;
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct-loop convolution used as an oracle for the GEMM lowering.
    fn naive(conv: &Conv2d<f64>, x: &FeatureMap<f64>) -> FeatureMap<f64> {
        let (oh, ow) = conv.output_dims(x.height, x.width);
        let k = conv.kernel;
        let mut y = FeatureMap::zeros(conv.out_channels, oh, ow);
        for co in 0..conv.out_channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = conv.bias[co];
                    for ci in 0..conv.in_channels {
                        for ki in 0..k {
                            for kj in 0..k {
                                let iy = (oy * conv.stride + ki) as isize - conv.padding as isize;
                                let ix = (ox * conv.stride + kj) as isize - conv.padding as isize;
                                if iy < 0 || ix < 0 || iy >= x.height as isize || ix >= x.width as isize {
                                    continue;
                                }
                                acc += conv.weight[((co * conv.in_channels + ci) * k + ki) * k + kj]
                                    * x.data[(ci * x.height + iy as usize) * x.width + ix as usize];
                            }
                        }
                    }
                    y.data[(co * oh + oy) * ow + ox] = acc;
                }
            }
        }
        y
    }

    fn setup(stride: usize) -> (Conv2d<f64>, FeatureMap<f64>) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut conv = Conv2d::<f64>::new(3, 4, 5, stride);
        conv.init_uniform(&mut rng, 0.2);
        conv.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        let x = FeatureMap::from_vec(3, 9, 12, (0..3 * 9 * 12).map(|_| rng.random_range(-1.0..1.0)).collect());
        (conv, x)
    }

    #[test]
    fn matches_direct_convolution() {
        for stride in [1, 2] {
            let (conv, x) = setup(stride);
            let fast = conv.forward(&x);
            let slow = naive(&conv, &x);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stride_two_halves_even_sizes() {
        let conv = Conv2d::<f32>::new(1, 1, 5, 2);
        assert_eq!(conv.output_dims(256, 256), (128, 128));
        assert_eq!(conv.output_dims(8, 8), (4, 4));
    }

    #[test]
    fn backward_matches_finite_differences() {
        for stride in [1, 2] {
            let (conv, x) = setup(stride);
            let y = conv.forward(&x);
            // Loss = sum(y * g) for a fixed random g.
            let g = FeatureMap::from_vec(
                y.channels,
                y.height,
                y.width,
                (0..y.data.len()).map(|i| ((i * 37 % 17) as f64 - 8.0) / 8.0).collect(),
            );
            let loss = |c: &Conv2d<f64>, x: &FeatureMap<f64>| -> f64 {
                c.forward(x).data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
            };
            let mut grad = ConvGrad::zeros_like(&conv);
            let dx = conv.backward(&x, &g, &mut grad, true).unwrap();
            let eps = 1e-6;
            for idx in [0, 7, 33, 99] {
                let mut c = conv.clone();
                c.weight[idx] += eps;
                let up = loss(&c, &x);
                c.weight[idx] -= 2.0 * eps;
                let down = loss(&c, &x);
                let fd = (up - down) / (2.0 * eps);
                assert!((fd - grad.weight[idx]).abs() < 1e-6, "w{idx}: {fd} vs {}", grad.weight[idx]);
            }
            for idx in [0, 50, 200, 323] {
                let mut xp = x.clone();
                xp.data[idx] += eps;
                let up = loss(&conv, &xp);
                xp.data[idx] -= 2.0 * eps;
                let down = loss(&conv, &xp);
                let fd = (up - down) / (2.0 * eps);
                assert!((fd - dx.data[idx]).abs() < 1e-6, "x{idx}");
            }
            let fd_bias: f64 = g.data[..g.plane()].iter().sum();
            assert!((grad.bias[0] - fd_bias).abs() < 1e-9);
        }
    }
}
