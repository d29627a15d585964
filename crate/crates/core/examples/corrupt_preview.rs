//! Paints every corruption model onto one synthetic texture and writes the
//! corrupted images with their masks.
//!
//! cargo run --example corrupt_preview -- [out_dir]

use std::path::PathBuf;

use aesc::corruption::{corrupt, CorruptionKind, CorruptionSpec};
use aesc::dataset::synthetic::generate_texture;
use aesc::dataset::Generator;
use aesc::rng::{Purpose, SeedTree};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples/corrupt".into());
    std::fs::create_dir_all(&out)?;
    let seeds = SeedTree::new(42);
    let clean = generate_texture(Generator::Blobs, 256, &mut seeds.stream(Purpose::Synthetic, 0, 0))?;
    clean.save_png(&out.join("clean.png"))?;

    for (i, &kind) in CorruptionKind::ALL.iter().enumerate() {
        let sample = corrupt(&clean, &CorruptionSpec::new(kind), &mut seeds.stream(Purpose::Preview, i as u64, 0))?;
        sample.input.save_png(&out.join(format!("{}.png", kind.name())))?;
        sample.mask.save_png_8bit(&out.join(format!("{}_mask.png", kind.name())))?;
        let share = sample.mask.count() as f64 / clean.len() as f64;
        println!("{:<9} applied {:<9} mask {:6.2}%", kind.name(), sample.applied.name(), 100.0 * share);
    }
    println!("wrote {}", out.display());
    Ok(())
}
