//! Scores a synthetic test set with both detection strategies and renders the
//! AUC report, ROC plots and preview panels.
//!
//! cargo run --release --example evaluate_report -- [out_dir]

use std::path::PathBuf;

use aesc::dataset::{make_synthetic, Generator, SyntheticDatasetSpec};
use aesc::evaluation::{evaluate_category, render_report, EvalConfig};
use aesc::model::{ModelSpec, Network};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples/evaluate".into());
    let spec = ModelSpec {
        input_height: 64,
        input_width: 64,
        levels: 4,
        kernel: 5,
        channel_plan: vec![8, 16, 32, 32],
        skip_connections: true,
        dropout_schedule: vec![0.0, 0.0, 0.1, 0.2],
        leaky_slope: 0.2,
    };
    let network = Network::build(spec, 1)?;

    let mut results = Vec::new();
    for generator in [Generator::Stripes, Generator::Checker] {
        let data = SyntheticDatasetSpec::new(generator, 1, 8, 8, 2).with_resolution(64);
        let index = make_synthetic(&data, &out.join("data"))?;
        let cfg = EvalConfig {
            passes: 10,
            ..EvalConfig::default()
        };
        results.push(evaluate_category(&network, &index, &cfg, 3)?);
    }
    let report = render_report(&results, &out, "")?;
    print!("{}", report.to_text());
    println!("wrote {}", out.display());
    Ok(())
}
