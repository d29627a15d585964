//! Trains a small skip-connected autoencoder to remove Stain noise from
//! synthetic textures, then saves and reloads the checkpoint.
//!
//! cargo run --release --example train_denoiser -- [out_dir] [epochs]

use std::path::PathBuf;

use aesc::corruption::{CorruptionKind, CorruptionSpec};
use aesc::dataset::{make_synthetic, Generator, SyntheticDatasetSpec};
use aesc::model::{Checkpoint, ModelSpec, Network};
use aesc::training::{train_images, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "target/examples/train".into());
    let epochs = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);

    let data = SyntheticDatasetSpec::new(Generator::Blobs, 40, 4, 4, 1).with_resolution(64);
    let images = make_synthetic(&data, &out.join("data"))?.load_train((64, 64))?;

    let spec = ModelSpec {
        input_height: 64,
        input_width: 64,
        levels: 4,
        kernel: 5,
        channel_plan: vec![16, 32, 64, 64],
        skip_connections: true,
        dropout_schedule: vec![0.0, 0.0, 0.1, 0.2],
        leaky_slope: 0.2,
    };
    let cfg = TrainConfig {
        epochs,
        batch_size: 1,
        learning_rate: 5e-4,
        corruption: CorruptionSpec::new(CorruptionKind::Stain),
        seed: 7,
        ..TrainConfig::default()
    };
    let outcome = train_images(Network::build(spec, 7)?, images, cfg)?;
    for r in &outcome.history.records {
        println!("epoch {:>3}  mse {:.5}  val {:.2} dB  lr {}", r.epoch, r.train_mse, r.val_psnr, r.lr);
    }

    let path = out.join("denoiser.ckpt");
    Checkpoint::new(outcome.best_network.clone()).save(&path)?;
    let restored = Checkpoint::load(&path)?;
    assert_eq!(restored.network, outcome.best_network);
    println!("best epoch {:?}, checkpoint {}", outcome.history.best_epoch, path.display());
    Ok(())
}
