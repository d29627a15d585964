//! AE / AESc convolutional autoencoders.
//!
//! Encoder level `L` (1-based) is a stride-2 5x5 convolution, leaky ReLU and
//! spatial dropout at `dropout_schedule[L - 1]`, halving the resolution each
//! time. The decoder mirrors it: each stage upsamples by two (nearest),
//! optionally adds the encoder output of the same resolution, then convolves.
//! The last stage, back at input resolution, projects to one channel through a
//! sigmoid.
//!
//! ```text
//! 256 ─conv/2─ 128 ─conv/2─ 64 ... 8 ─conv/2─ 4   (bottleneck, no skip)
//!               │            │       │         │
//!               +            +       +         up
//! 256 ◄─conv─up─128◄─conv─up─64 ... 8 ◄─conv───┘
//! ```

pub mod checkpoint;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::nn::ops::{
    leaky_relu_backward, leaky_relu_inplace, scale_channels, sigmoid_backward, sigmoid_inplace,
    spatial_dropout_factors, upsample2x, upsample2x_backward,
};
use crate::nn::{Conv2d, ConvGrad, FeatureMap, Real};
use crate::rng::{Purpose, SeedTree};

pub use checkpoint::Checkpoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_height: usize,
    pub input_width: usize,
    pub levels: usize,
    pub kernel: usize,
    /// Output channels of each encoder level, highest resolution first.
    pub channel_plan: Vec<usize>,
    pub skip_connections: bool,
    /// Spatial dropout rate per level, highest resolution first.
    pub dropout_schedule: Vec<f64>,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
}

fn default_slope() -> f64 {
    0.2
}

impl ModelSpec {
    /// The 256x256 AESc network: six levels down to a 4x4x512 latent space.
    pub fn aesc() -> Self {
        Self {
            input_height: 256,
            input_width: 256,
            levels: 6,
            kernel: 5,
            channel_plan: vec![32, 64, 128, 256, 512, 512],
            skip_connections: true,
            dropout_schedule: vec![0.0, 0.0, 0.1, 0.2, 0.3, 0.4],
            leaky_slope: default_slope(),
        }
    }

    /// Same as [`ModelSpec::aesc`] without skip connections.
    pub fn ae() -> Self {
        Self {
            skip_connections: false,
            ..Self::aesc()
        }
    }

    pub fn with_skips(mut self, skips: bool) -> Self {
        self.skip_connections = skips;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.levels == 0 {
            return bad("model needs at least one level".into());
        }
        if self.kernel.is_multiple_of(2) {
            return bad(format!("kernel size {} must be odd", self.kernel));
        }
        if self.channel_plan.len() != self.levels || self.channel_plan.contains(&0) {
            return bad(format!(
                "channel plan {:?} must list {} positive channel counts",
                self.channel_plan, self.levels
            ));
        }
        if self.dropout_schedule.len() != self.levels
            || self.dropout_schedule.iter().any(|r| !(0.0..1.0).contains(r))
        {
            return bad(format!(
                "dropout schedule {:?} must list {} rates in [0, 1)",
                self.dropout_schedule, self.levels
            ));
        }
        let factor = 1usize << self.levels;
        if !self.input_height.is_multiple_of(factor) || !self.input_width.is_multiple_of(factor) {
            return bad(format!(
                "input {}x{} is not divisible by 2^{}",
                self.input_height, self.input_width, self.levels
            ));
        }
        if self.skip_connections && self.levels >= 2 {
            let n = self.levels;
            if self.channel_plan[n - 1] != self.channel_plan[n - 2] {
                return bad(format!(
                    "additive skip at level {} needs {} channels from the bottleneck, plan gives {}",
                    n - 1,
                    self.channel_plan[n - 2],
                    self.channel_plan[n - 1]
                ));
            }
        }
        Ok(())
    }

    /// `(channels, height, width)` of encoder level `level` (1-based).
    pub fn level_shape(&self, level: usize) -> (usize, usize, usize) {
        (
            self.channel_plan[level - 1],
            self.input_height >> level,
            self.input_width >> level,
        )
    }

    pub fn bottleneck_shape(&self) -> (usize, usize, usize) {
        self.level_shape(self.levels)
    }

    /// Encoder level served by decoder stage `stage` (0 = input resolution).
    fn stage_level(&self, stage: usize) -> usize {
        self.levels - 1 - stage
    }

    fn stage_channels(&self, stage: usize) -> (usize, usize) {
        let level = self.stage_level(stage);
        let input = if stage == 0 {
            self.channel_plan[self.levels - 1]
        } else {
            self.stage_channels(stage - 1).1
        };
        let output = match level {
            0 => 1,
            1 => self.channel_plan[0],
            l => self.channel_plan[l - 2],
        };
        (input, output)
    }
}

/// Network output, an image in `[0, 1]` of the input's size.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction(pub GrayImage);

impl Reconstruction {
    pub fn image(&self) -> &GrayImage {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: ModelSpec,
    seed: u64,
    pub encoder: Vec<Conv2d<T>>,
    pub decoder: Vec<Conv2d<T>>,
}

/// Parameter gradients, laid out like [`Network`]'s layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub encoder: Vec<ConvGrad<T>>,
    pub decoder: Vec<ConvGrad<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn reset(&mut self) {
        self.encoder.iter_mut().chain(&mut self.decoder).for_each(|g| g.reset());
    }

    /// Flat views in the same order as [`Network::param_groups_mut`].
    pub fn groups_mut(&mut self) -> Vec<&mut [T]> {
        self.encoder
            .iter_mut()
            .chain(&mut self.decoder)
            .flat_map(|g| [&mut g.weight[..], &mut g.bias[..]])
            .collect()
    }

    pub fn groups(&self) -> Vec<&[T]> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|g| [&g.weight[..], &g.bias[..]])
            .collect()
    }
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    input: FeatureMap<T>,
    /// Post-activation (pre-dropout) output per encoder level.
    enc_act: Vec<FeatureMap<T>>,
    /// Post-dropout output per encoder level.
    enc_out: Vec<FeatureMap<T>>,
    enc_drop: Vec<Option<Vec<T>>>,
    /// Convolution input per decoder stage.
    dec_in: Vec<FeatureMap<T>>,
    dec_act: Vec<FeatureMap<T>>,
    dec_drop: Vec<Option<Vec<T>>>,
    pub output: FeatureMap<T>,
}

impl<T: Real> ForwardTrace<T> {
    /// Encoder outputs, highest resolution first (the last is the bottleneck).
    pub fn encoder_outputs(&self) -> &[FeatureMap<T>] {
        &self.enc_out
    }
}

impl<T: Real> Network<T> {
    /// Builds and initializes a network; weights are drawn from the `Init`
    /// stream of `seed`.
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut net = Self::zeroed(spec, seed)?;
        let mut rng = SeedTree::new(seed).stream(Purpose::Init, 0, 0);
        let slope = net.spec.leaky_slope;
        for conv in net.encoder.iter_mut().chain(&mut net.decoder) {
            conv.init_uniform(&mut rng, slope);
        }
        Ok(net)
    }

    /// Builds the layer structure with all-zero parameters.
    pub fn zeroed(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let k = spec.kernel;
        let mut encoder = Vec::with_capacity(spec.levels);
        let mut channels = 1;
        for &out in &spec.channel_plan {
            encoder.push(Conv2d::new(channels, out, k, 2));
            channels = out;
        }
        let decoder = (0..spec.levels)
            .map(|stage| {
                let (cin, cout) = spec.stage_channels(stage);
                Conv2d::new(cin, cout, k, 1)
            })
            .collect();
        Ok(Self {
            spec,
            seed,
            encoder,
            decoder,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.encoder.iter().chain(&self.decoder).map(Conv2d::param_count).sum()
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients {
            encoder: self.encoder.iter().map(ConvGrad::zeros_like).collect(),
            decoder: self.decoder.iter().map(ConvGrad::zeros_like).collect(),
        }
    }

    pub fn param_groups_mut(&mut self) -> Vec<&mut [T]> {
        self.encoder
            .iter_mut()
            .chain(&mut self.decoder)
            .flat_map(|c| [&mut c.weight[..], &mut c.bias[..]])
            .collect()
    }

    pub fn param_groups(&self) -> Vec<&[T]> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|c| [&c.weight[..], &c.bias[..]])
            .collect()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.param_groups().iter().map(|g| g.len()).collect()
    }

    /// Converts parameters to another precision.
    pub fn cast<U: Real>(&self) -> Network<U> {
        let conv = |c: &Conv2d<T>| Conv2d {
            in_channels: c.in_channels,
            out_channels: c.out_channels,
            kernel: c.kernel,
            stride: c.stride,
            padding: c.padding,
            weight: c.weight.iter().map(|v| U::lit(v.to_f64().unwrap())).collect(),
            bias: c.bias.iter().map(|v| U::lit(v.to_f64().unwrap())).collect(),
        };
        Network {
            spec: self.spec.clone(),
            seed: self.seed,
            encoder: self.encoder.iter().map(conv).collect(),
            decoder: self.decoder.iter().map(conv).collect(),
        }
    }

    fn check_input(&self, x: &FeatureMap<T>) -> Result<()> {
        let expected = (1, self.spec.input_height, self.spec.input_width);
        if x.shape() != expected {
            return Err(Error::shape(
                format!("{}x{}", expected.1, expected.2),
                format!("{}x{} ({} channels)", x.height, x.width, x.channels),
            ));
        }
        Ok(())
    }

    /// Runs the network, keeping every activation needed by [`Network::backward`].
    /// Dropout is active iff `dropout` is given.
    pub fn forward_trace<R: Rng + ?Sized>(
        &self,
        input: &FeatureMap<T>,
        mut dropout: Option<&mut R>,
    ) -> Result<ForwardTrace<T>> {
        self.check_input(input)?;
        let slope = T::lit(self.spec.leaky_slope);
        let mut drop_factors = |channels: usize, rate: f64| -> Option<Vec<T>> {
            match dropout.as_deref_mut() {
                Some(rng) if rate > 0.0 => Some(spatial_dropout_factors(channels, rate, rng)),
                _ => None,
            }
        };

        let n = self.spec.levels;
        let mut enc_act = Vec::with_capacity(n);
        let mut enc_out: Vec<FeatureMap<T>> = Vec::with_capacity(n);
        let mut enc_drop = Vec::with_capacity(n);
        for (level, conv) in self.encoder.iter().enumerate() {
            let x = if level == 0 { input } else { &enc_out[level - 1] };
            let mut a = conv.forward(x);
            leaky_relu_inplace(&mut a, slope);
            let factors = drop_factors(a.channels, self.spec.dropout_schedule[level]);
            let mut out = a.clone();
            if let Some(f) = &factors {
                scale_channels(&mut out, f);
            }
            enc_act.push(a);
            enc_drop.push(factors);
            enc_out.push(out);
        }

        let mut dec_in = Vec::with_capacity(n);
        let mut dec_act = Vec::with_capacity(n);
        let mut dec_drop = Vec::with_capacity(n);
        let mut current = enc_out[n - 1].clone();
        for (stage, conv) in self.decoder.iter().enumerate() {
            let level = self.spec.stage_level(stage);
            let mut x = upsample2x(&current);
            if self.spec.skip_connections && level >= 1 {
                x.add_assign(&enc_out[level - 1]);
            }
            let mut a = conv.forward(&x);
            dec_in.push(x);
            if level == 0 {
                sigmoid_inplace(&mut a);
                current = a;
                break;
            }
            leaky_relu_inplace(&mut a, slope);
            let factors = drop_factors(a.channels, self.spec.dropout_schedule[level - 1]);
            let mut out = a.clone();
            if let Some(f) = &factors {
                scale_channels(&mut out, f);
            }
            dec_act.push(a);
            dec_drop.push(factors);
            current = out;
        }

        Ok(ForwardTrace {
            input: input.clone(),
            enc_act,
            enc_out,
            enc_drop,
            dec_in,
            dec_act,
            dec_drop,
            output: current,
        })
    }

    /// Backpropagates `d_output` (gradient w.r.t. the sigmoid output) through
    /// the traced pass, accumulating into `grads`.
    pub fn backward(&self, trace: &ForwardTrace<T>, d_output: &FeatureMap<T>, grads: &mut Gradients<T>) {
        let slope = T::lit(self.spec.leaky_slope);
        let n = self.spec.levels;
        let mut skip_grads: Vec<Option<FeatureMap<T>>> = vec![None; n];

        let mut d = d_output.clone();
        for stage in (0..n).rev() {
            let level = self.spec.stage_level(stage);
            if level == 0 {
                sigmoid_backward(&mut d, &trace.output);
            } else {
                if let Some(f) = &trace.dec_drop[stage] {
                    scale_channels(&mut d, f);
                }
                leaky_relu_backward(&mut d, &trace.dec_act[stage], slope);
            }
            let d_in = self.decoder[stage]
                .backward(&trace.dec_in[stage], &d, &mut grads.decoder[stage], true)
                .expect("input gradient requested");
            if self.spec.skip_connections && level >= 1 {
                skip_grads[level - 1] = Some(d_in.clone());
            }
            d = upsample2x_backward(&d_in);
        }

        // `d` is now the gradient w.r.t. the bottleneck output.
        for level in (0..n).rev() {
            if let Some(s) = &skip_grads[level] {
                d.add_assign(s);
            }
            if let Some(f) = &trace.enc_drop[level] {
                scale_channels(&mut d, f);
            }
            leaky_relu_backward(&mut d, &trace.enc_act[level], slope);
            let x = if level == 0 { &trace.input } else { &trace.enc_out[level - 1] };
            match self.encoder[level].backward(x, &d, &mut grads.encoder[level], level > 0) {
                Some(dx) => d = dx,
                None => break,
            }
        }
    }

    /// Mean squared error against `target` and its gradient w.r.t. the
    /// output, with the gradient scaled by `1 / batch`.
    pub fn mse_and_grad(output: &FeatureMap<T>, target: &FeatureMap<T>, batch: usize) -> (f64, FeatureMap<T>) {
        assert_eq!(output.shape(), target.shape(), "mse shapes");
        let count = output.data.len() as f64;
        let scale = T::lit(2.0 / (count * batch as f64));
        let mut sum = 0.0;
        let grad = output
            .data
            .iter()
            .zip(&target.data)
            .map(|(&y, &t)| {
                let e = y - t;
                sum += e.to_f64().unwrap().powi(2);
                e * scale
            })
            .collect();
        (
            sum / count,
            FeatureMap::from_vec(output.channels, output.height, output.width, grad),
        )
    }
}

pub fn image_to_map<T: Real>(image: &GrayImage) -> FeatureMap<T> {
    FeatureMap::from_vec(
        1,
        image.height(),
        image.width(),
        image.pixels().iter().map(|&v| T::lit(v as f64)).collect(),
    )
}

fn map_to_reconstruction<T: Real>(map: &FeatureMap<T>) -> Result<Reconstruction> {
    let pixels = map.data.iter().map(|v| v.to_f32().unwrap_or(f32::NAN)).collect();
    Ok(Reconstruction(GrayImage::from_vec_clamped(map.height, map.width, pixels)?))
}

impl<T: Real> Network<T> {
    /// Deterministic reconstruction with dropout disabled.
    pub fn forward(&self, image: &GrayImage) -> Result<Reconstruction> {
        let trace = self.forward_trace::<crate::rng::Stream>(&image_to_map(image), None)?;
        map_to_reconstruction(&trace.output)
    }

    /// One reconstruction with dropout active, drawing masks from `rng`.
    pub fn forward_stochastic<R: Rng + ?Sized>(&self, image: &GrayImage, rng: &mut R) -> Result<Reconstruction> {
        let trace = self.forward_trace(&image_to_map(image), Some(rng))?;
        map_to_reconstruction(&trace.output)
    }

    /// `passes` dropout-active reconstructions of `image` for MC dropout.
    pub fn mc_forward<R: Rng + ?Sized>(
        &self,
        image: &GrayImage,
        passes: usize,
        rng: &mut R,
    ) -> Result<Vec<Reconstruction>> {
        if passes < 2 {
            return Err(Error::Config(format!("MC dropout needs at least 2 passes, got {passes}")));
        }
        (0..passes).map(|_| self.forward_stochastic(image, rng)).collect()
    }
}

/// Default number of MC dropout passes.
pub const MC_PASSES: usize = 30;

#[cfg(test)]
mod tests {
    use super::*;

    fn small(skips: bool) -> ModelSpec {
        ModelSpec {
            input_height: 32,
            input_width: 32,
            levels: 3,
            kernel: 5,
            channel_plan: vec![4, 8, 8],
            skip_connections: skips,
            dropout_schedule: vec![0.0, 0.2, 0.4],
            leaky_slope: 0.2,
        }
    }

    #[test]
    fn default_spec_is_valid() {
        ModelSpec::aesc().validate().unwrap();
        ModelSpec::ae().validate().unwrap();
        assert_eq!(ModelSpec::aesc().bottleneck_shape(), (512, 4, 4));
    }

    #[test]
    fn skip_channel_mismatch_is_rejected() {
        let mut spec = small(true);
        spec.channel_plan = vec![4, 8, 16];
        assert!(matches!(Network::<f32>::build(spec.clone(), 0), Err(Error::Config(_))));
        spec.skip_connections = false;
        assert!(Network::<f32>::build(spec, 0).is_ok());
    }

    #[test]
    fn invalid_specs() {
        let mut s = small(true);
        s.dropout_schedule = vec![0.0, 1.0, 0.0];
        assert!(s.validate().is_err());
        let mut s = small(true);
        s.input_height = 36;
        assert!(s.validate().is_err());
        let mut s = small(true);
        s.kernel = 4;
        assert!(s.validate().is_err());
    }

    #[test]
    fn decoder_channel_chain() {
        let net = Network::<f32>::build(ModelSpec::aesc(), 0).unwrap();
        let chain: Vec<_> = net.decoder.iter().map(|c| (c.in_channels, c.out_channels)).collect();
        assert_eq!(
            chain,
            vec![(512, 256), (256, 128), (128, 64), (64, 32), (32, 32), (32, 1)]
        );
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let net = Network::<f32>::build(small(true), 0).unwrap();
        let img = GrayImage::filled(16, 16, 0.1).unwrap();
        assert!(matches!(net.forward(&img), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn mc_forward_needs_two_passes() {
        let net = Network::<f32>::build(small(true), 0).unwrap();
        let img = GrayImage::filled(32, 32, 0.3).unwrap();
        let mut rng = SeedTree::new(0).stream(Purpose::McDropout, 0, 0);
        assert!(net.mc_forward(&img, 1, &mut rng).is_err());
        assert_eq!(net.mc_forward(&img, 3, &mut rng).unwrap().len(), 3);
    }

    #[test]
    fn forward_is_deterministic_and_in_range() {
        let net = Network::<f32>::build(small(true), 3).unwrap();
        let img = GrayImage::from_fn(32, 32, |r, c| ((r * c) % 9) as f32 / 8.0).unwrap();
        let a = net.forward(&img).unwrap();
        let b = net.forward(&img).unwrap();
        assert_eq!(a, b);
        assert!(a.image().pixels().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
