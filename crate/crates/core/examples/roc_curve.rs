//! Exact ROC curve and AUC for a handful of scores, including ties, plus the
//! rendered curve.
//!
//! cargo run --example roc_curve -- [out_png]

use aesc::evaluation::plot::{roc_image, save_rgb};
use aesc::evaluation::roc_auc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scores = [0.9, 0.8, 0.8, 0.7, 0.55, 0.5, 0.5, 0.3, 0.2, 0.1];
    let labels = [true, true, false, true, false, true, false, false, true, false];
    let roc = roc_auc(&scores, &labels)?;
    println!("{} positive, {} negative, AUC {:.4}", roc.n_positive, roc.n_negative, roc.auc);
    for (fpr, tpr) in &roc.points {
        println!("  fpr {fpr:.2}  tpr {tpr:.2}");
    }
    let path = std::env::args().nth(1).unwrap_or_else(|| "target/examples/roc.png".into());
    if let Some(dir) = std::path::Path::new(&path).parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_rgb(&roc_image(&roc.points, roc.auc), path.as_ref())?;
    println!("wrote {path}");
    Ok(())
}
