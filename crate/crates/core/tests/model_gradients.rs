//! Analytic gradients of the full autoencoder against central differences.

use aesc::model::{ModelSpec, Network};
use aesc::nn::FeatureMap;
use aesc::rng::{Purpose, SeedTree};
use rand::Rng;

fn miniature(skips: bool) -> ModelSpec {
    ModelSpec {
        input_height: 16,
        input_width: 16,
        levels: 2,
        kernel: 5,
        channel_plan: vec![3, 3],
        skip_connections: skips,
        dropout_schedule: vec![0.0, 0.0],
        leaky_slope: 0.2,
    }
}

fn loss(net: &Network<f64>, x: &FeatureMap<f64>, t: &FeatureMap<f64>, dropout_seed: Option<u64>) -> f64 {
    let mut rng = dropout_seed.map(|s| SeedTree::new(s).stream(Purpose::Dropout, 0, 0));
    let trace = net.forward_trace(x, rng.as_mut()).unwrap();
    Network::mse_and_grad(&trace.output, t, 1).0
}

/// Largest relative error over all parameters, with a floor on the
/// denominator so parameters with vanishing gradients do not dominate.
fn max_relative_error(spec: ModelSpec, dropout_seed: Option<u64>) -> f64 {
    let net = Network::<f64>::build(spec, 5).unwrap();
    let mut rng = SeedTree::new(1).stream(Purpose::Synthetic, 0, 0);
    let x = FeatureMap::from_vec(1, 16, 16, (0..256).map(|_| rng.random_range(0.0..1.0)).collect());
    let t = FeatureMap::from_vec(1, 16, 16, (0..256).map(|_| rng.random_range(0.0..1.0)).collect());

    let mut drop_rng = dropout_seed.map(|s| SeedTree::new(s).stream(Purpose::Dropout, 0, 0));
    let trace = net.forward_trace(&x, drop_rng.as_mut()).unwrap();
    let (_, d_out) = Network::mse_and_grad(&trace.output, &t, 1);
    let mut grads = net.zero_gradients();
    net.backward(&trace, &d_out, &mut grads);
    let analytic: Vec<f64> = grads.groups().iter().flat_map(|g| g.iter().copied()).collect();
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let eps = 1e-6;
    let mut worst = 0.0f64;
    let mut flat_index = 0;
    let sizes = net.group_sizes();
    for (group, &size) in sizes.iter().enumerate() {
        for i in 0..size {
            let mut plus = net.clone();
            plus.param_groups_mut()[group][i] += eps;
            let mut minus = net.clone();
            minus.param_groups_mut()[group][i] -= eps;
            let numeric = (loss(&plus, &x, &t, dropout_seed) - loss(&minus, &x, &t, dropout_seed)) / (2.0 * eps);
            let a = analytic[flat_index];
            let denom = a.abs().max(numeric.abs()).max(1e-3 * scale);
            worst = worst.max((a - numeric).abs() / denom);
            flat_index += 1;
        }
    }
    worst
}

#[test]
fn skip_network_gradients_match_finite_differences() {
    let err = max_relative_error(miniature(true), None);
    assert!(err <= 1e-4, "max relative error {err:e}");
}

#[test]
fn plain_network_gradients_match_finite_differences() {
    let err = max_relative_error(miniature(false), None);
    assert!(err <= 1e-4, "max relative error {err:e}");
}

#[test]
fn gradients_hold_with_fixed_dropout_masks() {
    let mut spec = miniature(true);
    spec.dropout_schedule = vec![0.3, 0.5];
    let err = max_relative_error(spec, Some(99));
    assert!(err <= 1e-4, "max relative error {err:e}");
}
