//! The `aesc` command line: every subcommand reads one JSON run config.
//!
//! Output files are prefixed with a config digest so that runs with different
//! settings never overwrite each other. Exit codes: 0 success, 2 config
//! error, 3 data error, 4 numeric failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, StrategyChoice};
use crate::corruption::{corrupt, CorruptionKind, CorruptionSpec};
use crate::dataset::{load_image, make_synthetic, synthetic::generate_texture};
use crate::detection::{detect, image_score};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_category, render_report, CategoryResult, EvalReport, SavedCategory};
use crate::image::GrayImage;
use crate::model::{checkpoint::spec_hash, Checkpoint, Network};
use crate::rng::{Purpose, SeedTree};
use crate::training::Trainer;

#[derive(Debug, Parser)]
#[command(name = "aesc", version, about = "Stain-corrupted autoencoder anomaly detection")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-image work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write corrupted previews, their masks and a manifest.
    Corrupt {
        #[arg(long, default_value_t = 4)]
        count: usize,
        /// Overrides `train.corruption.kind`.
        #[arg(long)]
        kind: Option<CorruptionKind>,
    },
    /// Write the synthetic dataset described by `dataset.synthetic`.
    SynthData,
    /// Train and write a checkpoint, the history CSV and a config sidecar.
    Train {
        /// Continue from a training state; without a path, from this
        /// config's own state file.
        #[arg(long, num_args = 0..=1)]
        resume: Option<Option<PathBuf>>,
        /// Overrides `train.epochs`.
        #[arg(long)]
        epochs: Option<usize>,
        /// Save the training state every this many epochs.
        #[arg(long, default_value_t = 10)]
        save_every: usize,
    },
    /// Write anomaly maps of one image.
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyChoice>,
    },
    /// Evaluate a checkpoint on the configured category.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyChoice>,
    },
    /// Combine saved evaluations into one table.
    Report {
        /// Evaluation files; default: every `*_eval_*.json` in the output directory.
        #[arg(long, num_args = 1..)]
        inputs: Vec<PathBuf>,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config <FILE> is required".into()))?;
    let mut cfg = RunConfig::load(path)?.with_env_root();
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Command::Train { epochs: Some(e), .. } = &cli.command {
        cfg.train.epochs = *e;
    }
    if let Command::Detect { strategy: Some(s), .. } | Command::Evaluate { strategy: Some(s), .. } = &cli.command {
        cfg.detect.strategy = *s;
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    pool.install(|| match cli.command {
        Command::Corrupt { count, kind } => cmd_corrupt(&cfg, count, kind).map(|_| ()),
        Command::SynthData => cmd_synth_data(&cfg),
        Command::Train { resume, save_every, .. } => cmd_train(&cfg, resume, save_every).map(|_| ()),
        Command::Detect { input, checkpoint, .. } => cmd_detect(&cfg, &input, checkpoint.as_deref()),
        Command::Evaluate { checkpoint, .. } => cmd_evaluate(&cfg, checkpoint.as_deref()).map(|_| ()),
        Command::Report { inputs } => cmd_report(&cfg, &inputs).map(|_| ()),
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(value)?).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
struct PreviewEntry {
    input: String,
    mask: String,
    kind: CorruptionKind,
    masked_pixels: usize,
}

/// Corrupts `count` source images (dataset training images, or fresh
/// synthetic textures when the dataset has not been written) and returns the
/// output directory.
pub fn cmd_corrupt(cfg: &RunConfig, count: usize, kind: Option<CorruptionKind>) -> Result<PathBuf> {
    let mut spec = cfg.train.corruption;
    if let Some(k) = kind {
        spec = CorruptionSpec { kind: k, ..spec };
    }
    spec.validate()?;
    let res = (cfg.model.input_height, cfg.model.input_width);
    let seeds = SeedTree::new(cfg.seed);
    let sources: Vec<PathBuf> = match cfg.dataset_index() {
        Ok(index) => index.train_paths,
        Err(e) if cfg.dataset.synthetic.is_none() => return Err(e),
        Err(_) => Vec::new(),
    };
    let source = |i: usize| -> Result<GrayImage> {
        if sources.is_empty() {
            let generator = cfg.synthetic_spec()?.generator;
            let mut rng = seeds.stream(Purpose::Synthetic, i as u64, 0);
            let img = generate_texture(generator, res.0, &mut rng)?;
            if img.dims() != res {
                return Err(Error::Config("synthetic previews need a square model input".into()));
            }
            Ok(img)
        } else {
            load_image(&sources[i % sources.len()], res)
        }
    };
    let dir = cfg.output_dir.join(format!("{}_corrupt", cfg.hash()));
    create_dir(&dir)?;
    let entries = (0..count)
        .into_par_iter()
        .map(|i| {
            let clean = source(i)?;
            let sample = corrupt(&clean, &spec, &mut seeds.stream(Purpose::Preview, i as u64, 0))?;
            let input = format!("{i:04}.png");
            let mask = format!("{i:04}_mask.png");
            sample.input.save_png(&dir.join(&input))?;
            sample.mask.save_png_1bit(&dir.join(&mask))?;
            Ok(PreviewEntry {
                input,
                mask,
                kind: sample.applied,
                masked_pixels: sample.mask.count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(
        &dir.join("manifest.json"),
        &serde_json::json!({ "seed": cfg.seed, "corruption": spec, "files": entries }),
    )?;
    info!("wrote {count} corrupted previews to {}", dir.display());
    Ok(dir)
}

pub fn cmd_synth_data(cfg: &RunConfig) -> Result<()> {
    let spec = cfg.synthetic_spec()?;
    let root = cfg.data_root()?;
    let index = make_synthetic(&spec, &root)?;
    info!(
        "wrote {} training and {} test images to {}",
        index.train_paths.len(),
        index.test_items.len(),
        root.join(&index.category).display()
    );
    Ok(())
}

/// Trains (or resumes) and returns the path of the written model checkpoint.
pub fn cmd_train(cfg: &RunConfig, resume: Option<Option<PathBuf>>, save_every: usize) -> Result<PathBuf> {
    let index = cfg.dataset_index()?;
    let images = index.load_train((cfg.model.input_height, cfg.model.input_width))?;
    create_dir(&cfg.output_dir)?;
    let state_path = cfg.state_path();
    let mut trainer = match resume {
        Some(path) => {
            let path = path.unwrap_or_else(|| state_path.clone());
            let trainer = Trainer::resume(&path, images, cfg.train.clone())?;
            if spec_hash(trainer.network().spec()) != spec_hash(&cfg.model) {
                return Err(Error::Config(format!(
                    "training state {} was made with a different model spec",
                    path.display()
                )));
            }
            info!("resuming after epoch {} at lr {}", trainer.epochs_done(), trainer.current_lr());
            trainer
        }
        None => Trainer::new(Network::build(cfg.model.clone(), cfg.seed)?, images, cfg.train.clone())?,
    };
    write_json(&cfg.output_dir.join(format!("{}_config.json", cfg.train_hash())), cfg)?;
    while trainer.epochs_done() < cfg.train.epochs {
        let r = trainer.run_epoch()?;
        info!(
            "epoch {}/{}: mse {:.6} val psnr {:.2} dB lr {}",
            r.epoch + 1,
            cfg.train.epochs,
            r.train_mse,
            r.val_psnr,
            r.lr
        );
        if save_every > 0 && trainer.epochs_done() % save_every == 0 {
            trainer.save_state(&state_path)?;
        }
    }
    trainer.save_state(&state_path)?;
    trainer.history().write_csv(&cfg.history_path())?;
    let keep_best = cfg.train.keep_best;
    let history = trainer.history().clone();
    let outcome = trainer.finish();
    let mut ckpt = Checkpoint::new(outcome.selected(keep_best).clone());
    ckpt.extra = serde_json::json!({
        "kind": "model",
        "config_hash": cfg.train_hash(),
        "selection": if keep_best { "best" } else { "final" },
        "best_epoch": history.best_epoch,
        "best_psnr": history.best_psnr(),
    });
    let path = cfg.checkpoint_path();
    ckpt.save(&path)?;
    info!("wrote {}", path.display());
    Ok(path)
}

/// Loads a model checkpoint, refusing one whose spec differs from the config.
pub fn load_model(cfg: &RunConfig, path: Option<&Path>) -> Result<(Network<f32>, String)> {
    let path = path.map(Path::to_path_buf).unwrap_or_else(|| cfg.checkpoint_path());
    let ckpt = Checkpoint::load(&path)?;
    let (have, want) = (spec_hash(ckpt.network.spec()), spec_hash(&cfg.model));
    if have != want {
        return Err(Error::Config(format!(
            "checkpoint {} has model spec {have}, config expects {want}",
            path.display()
        )));
    }
    Ok((ckpt.network, have))
}

pub fn cmd_detect(cfg: &RunConfig, input: &Path, checkpoint: Option<&Path>) -> Result<()> {
    let (net, hash) = load_model(cfg, checkpoint)?;
    let image = load_image(input, (cfg.model.input_height, cfg.model.input_width))?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    let dir = cfg.output_dir.join(format!("{}_maps", cfg.hash()));
    for kind in cfg.detect.strategy.kinds() {
        let mut rng = SeedTree::new(cfg.seed).stream(Purpose::McDropout, 0, 0);
        let map = detect(&net, &image, kind, cfg.detect.passes, &mut rng)?;
        let score = image_score(&map, cfg.detect.p)?;
        map.save(&dir.join(format!("{stem}_{}", kind.name())), &input.display().to_string(), &hash)?;
        println!("{} {}: score {score:.6}", input.display(), kind.name());
    }
    Ok(())
}

/// Evaluates the configured category and returns its saved-result path.
pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<PathBuf> {
    let (net, _) = load_model(cfg, checkpoint)?;
    let index = cfg.dataset_index()?;
    let result = evaluate_category(&net, &index, &cfg.eval_config(), cfg.seed)?;
    let prefix = format!("{}_", cfg.hash());
    let report = render_report(std::slice::from_ref(&result), &cfg.output_dir, &prefix)?;
    let saved = cfg.output_dir.join(format!("{prefix}eval_{}.json", result.category));
    write_json(&saved, &SavedCategory::from(&result))?;
    print!("{}", report.to_text());
    Ok(saved)
}

fn saved_evaluations(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.contains("_eval_") && name.ends_with(".json") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn cmd_report(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<EvalReport> {
    let files = if inputs.is_empty() {
        saved_evaluations(&cfg.output_dir)?
    } else {
        inputs.to_vec()
    };
    let mut results: Vec<CategoryResult> = Vec::new();
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(|e| Error::io(f, e))?;
        let saved: SavedCategory = serde_json::from_str(&text)?;
        if results.iter().any(|r| r.category == saved.category) {
            return Err(Error::Config(format!(
                "category `{}` appears in more than one evaluation file; pass --inputs explicitly",
                saved.category
            )));
        }
        results.push(saved.into());
    }
    if results.is_empty() {
        return Err(Error::Dataset(format!(
            "no evaluation files found in {}",
            cfg.output_dir.display()
        )));
    }
    let report = render_report(&results, &cfg.output_dir, "summary_")?;
    print!("{}", report.to_text());
    Ok(report)
}
