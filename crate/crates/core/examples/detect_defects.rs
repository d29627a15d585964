//! Builds residual and MC dropout uncertainty maps for a stained texture and
//! scores them with the image-level L2 norm.
//!
//! An untrained network is used so the example runs instantly; pass a
//! checkpoint saved by `train_denoiser` to see meaningful maps.
//!
//! cargo run --release --example detect_defects -- [out_dir] [checkpoint]

use std::path::PathBuf;

use aesc::corruption::{corrupt, CorruptionKind, CorruptionSpec};
use aesc::dataset::synthetic::generate_texture;
use aesc::dataset::Generator;
use aesc::detection::{detect, image_score, pixel_scores, MapKind};
use aesc::model::{Checkpoint, ModelSpec, Network, MC_PASSES};
use aesc::rng::{Purpose, SeedTree};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "target/examples/detect".into());
    let network = match args.next() {
        Some(path) => Checkpoint::load(path.as_ref())?.network,
        None => Network::build(
            ModelSpec {
                input_height: 64,
                input_width: 64,
                levels: 4,
                kernel: 5,
                channel_plan: vec![16, 32, 64, 64],
                skip_connections: true,
                dropout_schedule: vec![0.0, 0.0, 0.1, 0.2],
                leaky_slope: 0.2,
            },
            0,
        )?,
    };
    std::fs::create_dir_all(&out)?;

    let size = network.spec().input_height;
    let seeds = SeedTree::new(5);
    let clean = generate_texture(Generator::Blobs, size, &mut seeds.stream(Purpose::Synthetic, 0, 0))?;
    let stained = corrupt(
        &clean,
        &CorruptionSpec::new(CorruptionKind::Stain),
        &mut seeds.stream(Purpose::Preview, 0, 0),
    )?;
    stained.input.save_png(&out.join("input.png"))?;
    stained.mask.save_png_8bit(&out.join("mask.png"))?;

    for kind in [MapKind::Residual, MapKind::Uncertainty] {
        let mut rng = seeds.stream(Purpose::McDropout, 0, 0);
        let map = detect(&network, &stained.input, kind, MC_PASSES, &mut rng)?;
        map.save(&out.join(kind.name()), "input.png", "example")?;
        let peak = pixel_scores(&map)[0];
        let inside = stained.mask.get(peak.row, peak.col);
        println!(
            "{:<11} score {:.4}  peak {:.4} at ({}, {}) inside defect: {inside}",
            kind.name(),
            image_score(&map, 2.0)?,
            peak.score,
            peak.row,
            peak.col
        );
    }
    Ok(())
}
