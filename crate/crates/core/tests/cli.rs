use std::path::{Path, PathBuf};
use std::sync::Mutex;

use aesc::cli::main_with_args;
use aesc::config::{RunConfig, DATA_ROOT_ENV};
use aesc::model::Checkpoint;

// `run` reads the data-root variable, so commands must not overlap a test
// that sets it.
static ENV: Mutex<()> = Mutex::new(());

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"{{
  "seed": 11,
  "output_dir": "{out}",
  "dataset": {{
    "synthetic": {{
      "generator": "blobs", "count_train": 6, "count_test_clean": 3,
      "count_test_defective": 3, "defect_injector": {{"kind": "stain"}},
      "seed": 4, "resolution": 32
    }}
  }},
  "model": {{
    "input_height": 32, "input_width": 32, "levels": 2, "kernel": 5,
    "channel_plan": [4, 4], "skip_connections": true, "dropout_schedule": [0.0, 0.2]
  }},
  "train": {{"epochs": 2, "batch_size": 2, "learning_rate": 0.001, "plateau_patience": 1}},
  "detect": {{"passes": 3}}{extra}
}}"#,
        out = dir.join("out").display()
    );
    let path = dir.join("run.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn aesc(args: &[&str]) -> i32 {
    let mut full = vec!["aesc"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn prepared(extra: &str) -> (tempfile::TempDir, String, RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), extra);
    let cfg = RunConfig::load(&cfg_path).unwrap();
    let p = cfg_path.display().to_string();
    assert_eq!(aesc(&["synth-data", "--config", &p]), 0);
    (dir, p, cfg)
}

#[test]
fn train_smoke_and_checkpoint() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let (_dir, cfg_path, cfg) = prepared("");
    assert_eq!(aesc(&["train", "--config", &cfg_path]), 0);
    let ckpt = Checkpoint::load(&cfg.checkpoint_path()).unwrap();
    assert_eq!(ckpt.network.spec(), &cfg.model);
    let csv = std::fs::read_to_string(cfg.history_path()).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(cfg.output_dir.join(format!("{}_config.json", cfg.train_hash())).exists());
}

#[test]
fn resume_matches_uninterrupted_run() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let (_dir, cfg_path, cfg) = prepared("");
    assert_eq!(aesc(&["train", "--config", &cfg_path, "--epochs", "4"]), 0);
    let straight = std::fs::read_to_string(cfg.history_path()).unwrap();
    let straight_ckpt = std::fs::read(cfg.checkpoint_path()).unwrap();

    assert_eq!(aesc(&["train", "--config", &cfg_path, "--epochs", "2"]), 0);
    assert_eq!(aesc(&["train", "--config", &cfg_path, "--epochs", "4", "--resume"]), 0);
    let resumed = std::fs::read_to_string(cfg.history_path()).unwrap();
    assert_eq!(resumed.lines().count(), 5);
    // Learning rates, losses and weights continue exactly where they stopped.
    assert_eq!(resumed, straight);
    assert_eq!(std::fs::read(cfg.checkpoint_path()).unwrap(), straight_ckpt);
}

#[test]
fn evaluate_is_deterministic_and_toggles_columns() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let (_dir, cfg_path, cfg) = prepared("");
    assert_eq!(aesc(&["train", "--config", &cfg_path]), 0);
    assert_eq!(aesc(&["evaluate", "--config", &cfg_path, "--jobs", "2"]), 0);
    let csv_path = cfg.output_dir.join(format!("{}_report.csv", cfg.hash()));
    let first = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(aesc(&["evaluate", "--config", &cfg_path, "--jobs", "1"]), 0);
    assert_eq!(std::fs::read_to_string(&csv_path).unwrap(), first);
    let header = first.lines().next().unwrap();
    assert_eq!(
        header,
        "category,residual_image,residual_pixel,uncertainty_image,uncertainty_pixel"
    );
    let row: Vec<&str> = first.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "blobs");
    for cell in &row[1..] {
        let v: f64 = cell.parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }

    assert_eq!(aesc(&["evaluate", "--config", &cfg_path, "--strategy", "residual"]), 0);
    let mut residual_only = cfg.clone();
    residual_only.detect.strategy = aesc::config::StrategyChoice::Residual;
    let csv = std::fs::read_to_string(cfg.output_dir.join(format!("{}_report.csv", residual_only.hash()))).unwrap();
    assert_eq!(csv.lines().next(), Some("category,residual_image,residual_pixel"));

    assert_eq!(aesc(&["report", "--config", &cfg_path]), 2, "two evaluations of one category");
    let saved = cfg.output_dir.join(format!("{}_eval_blobs.json", cfg.hash()));
    assert_eq!(
        aesc(&["report", "--config", &cfg_path, "--inputs", saved.to_str().unwrap()]),
        0
    );
    assert!(cfg.output_dir.join("summary_report.txt").exists());

    let image = cfg.output_dir.join("data/blobs/test/stain/000.png");
    assert_eq!(
        aesc(&["detect", "--config", &cfg_path, "--input", image.to_str().unwrap()]),
        0
    );
    let maps = cfg.output_dir.join(format!("{}_maps", cfg.hash()));
    assert!(maps.join("000_residual.f32").exists());
    assert!(maps.join("000_uncertainty.png").exists());
}

#[test]
fn spec_mismatch_is_rejected() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let (dir, cfg_path, cfg) = prepared("");
    assert_eq!(aesc(&["train", "--config", &cfg_path]), 0);
    let mut other = cfg.clone();
    other.model.channel_plan = vec![8, 8];
    let other_path = dir.path().join("other.json");
    std::fs::write(&other_path, serde_json::to_string(&other).unwrap()).unwrap();
    let ckpt = cfg.checkpoint_path();
    let code = aesc(&[
        "evaluate",
        "--config",
        other_path.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn error_exit_codes() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    assert_eq!(aesc(&["train"]), 2);
    assert_eq!(aesc(&["train", "--config", "/nonexistent/run.json"]), 2);
    assert_eq!(aesc(&["frobnicate"]), 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), "");
    let p = cfg_path.to_str().unwrap();
    // Dataset not written yet.
    assert_eq!(aesc(&["train", "--config", p]), 3);
    let cfg = RunConfig::load(&cfg_path).unwrap();
    let err = aesc::cli::cmd_train(&cfg, None, 0).unwrap_err().to_string();
    assert!(err.contains(&cfg.output_dir.join("data").display().to_string()), "{err}");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, std::fs::read_to_string(&cfg_path).unwrap().replace("\"passes\": 3", "\"passes\": 1")).unwrap();
    assert_eq!(aesc(&["evaluate", "--config", bad.to_str().unwrap()]), 2);
}

#[test]
fn data_root_from_environment() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let (dir, cfg_path, cfg) = prepared("");
    let moved = dir.path().join("elsewhere");
    std::fs::rename(cfg.output_dir.join("data"), &moved).unwrap();
    assert_eq!(aesc(&["train", "--config", &cfg_path]), 3);
    std::env::set_var(DATA_ROOT_ENV, &moved);
    let code = aesc(&["train", "--config", &cfg_path]);
    std::env::remove_var(DATA_ROOT_ENV);
    assert_eq!(code, 0);
}

#[test]
fn corrupt_previews() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), "");
    let p = cfg_path.to_str().unwrap();
    let cfg = RunConfig::load(&cfg_path).unwrap();
    // Works before the dataset exists by drawing fresh textures.
    assert_eq!(aesc(&["corrupt", "--config", p, "--count", "4", "--kind", "stain"]), 0);
    let out = cfg.output_dir.join(format!("{}_corrupt", cfg.hash()));
    let listing = |d: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().path()).collect();
        v.sort();
        v
    };
    let files = listing(&out);
    assert_eq!(files.iter().filter(|f| f.to_str().unwrap().ends_with("_mask.png")).count(), 4);
    assert_eq!(files.len(), 9);
    let before: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(f).unwrap()).collect();
    assert_eq!(aesc(&["corrupt", "--config", p, "--count", "4", "--kind", "stain"]), 0);
    let after: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(f).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn mix1_manifest_frequencies() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), "");
    let mut cfg = RunConfig::load(&cfg_path).unwrap();
    cfg.train.corruption.kind = aesc::corruption::CorruptionKind::Mix1;
    let out = aesc::cli::cmd_corrupt(&cfg, 1000, None).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 1000);
    let stain = files.iter().filter(|f| f["kind"] == "stain").count() as f64 / 1000.0;
    // Binomial standard deviation at n = 1000 is about 0.0155.
    assert!((stain - 0.6).abs() < 0.05, "stain share {stain}");
}
