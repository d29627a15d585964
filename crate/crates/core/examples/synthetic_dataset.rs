//! Writes a small MVTec-style texture dataset with Stain-injected defects and
//! reads it back through the dataset index.
//!
//! cargo run --example synthetic_dataset -- [out_dir]

use std::path::PathBuf;

use aesc::dataset::{make_synthetic, scan_mvtec, Generator, Label, SyntheticDatasetSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples/data".into());
    let spec = SyntheticDatasetSpec::new(Generator::Stripes, 24, 6, 6, 3).with_resolution(128);
    let written = make_synthetic(&spec, &out)?;

    // The layout is the one a real MVTec category uses.
    let index = scan_mvtec(&out, &written.category)?;
    println!(
        "{}: {} train, {} clean test, {} defective test",
        index.category,
        index.train_paths.len(),
        index.count(Label::Clean),
        index.count(Label::Defective)
    );
    for item in index.test_items.iter().filter(|t| t.label.is_defective()) {
        let (_, mask) = index.load_test_item(item, index.resolution)?;
        println!("  {} defect pixels {}", item.path.display(), mask.count());
    }
    Ok(())
}
