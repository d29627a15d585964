//! Denoising training loop: corrupt on the fly, regress the clean target
//! under MSE with Adam, and halve the learning rate when validation PSNR
//! plateaus.

use std::fmt::Write as _;
use std::path::Path;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::corruption::{corrupt, CorruptedSample, CorruptionSpec};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::model::{image_to_map, Checkpoint, Network};
use crate::nn::{clip_global_norm, Adam, AdamConfig};
use crate::rng::{Purpose, SeedTree};

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay_factor: f64,
    pub plateau_patience: usize,
    /// Minimum PSNR gain (dB) that counts as an improvement.
    pub plateau_min_delta: f64,
    pub val_fraction: f64,
    pub corruption: CorruptionSpec,
    pub seed: u64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Apply the model's dropout schedule during training passes.
    pub train_dropout: bool,
    /// Return the best-validation-PSNR weights instead of the final ones.
    pub keep_best: bool,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            batch_size: 16,
            learning_rate: 0.01,
            lr_decay_factor: 0.5,
            plateau_patience: 30,
            plateau_min_delta: 0.01,
            val_fraction: 0.2,
            corruption: CorruptionSpec::default(),
            seed: 0,
            grad_clip: Some(5.0),
            train_dropout: true,
            keep_best: true,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0) || !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return bad("learning rate must be positive and the decay factor in (0, 1)");
        }
        if self.plateau_patience == 0 {
            return bad("plateau_patience must be positive");
        }
        self.corruption.validate()
    }
}

/// Peak signal-to-noise ratio with peak 1.0, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::shape(
            format!("{}x{}", a.height(), a.width()),
            format!("{}x{}", b.height(), b.width()),
        ));
    }
    let mse = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / a.len() as f64;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// Reduce-on-plateau schedule driven by a metric to maximize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub min_delta: f64,
    pub best: f64,
    /// Consecutive epochs without improvement.
    pub wait: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, factor: f64, patience: usize, min_delta: f64) -> Self {
        Self {
            lr,
            factor,
            patience,
            min_delta,
            best: f64::NEG_INFINITY,
            wait: 0,
        }
    }

    pub fn from_config(cfg: &TrainConfig) -> Self {
        Self::new(cfg.learning_rate, cfg.lr_decay_factor, cfg.plateau_patience, cfg.plateau_min_delta)
    }

    /// Feeds one epoch's metric; returns `true` when the rate was reduced.
    pub fn observe(&mut self, metric: f64) -> bool {
        if metric > self.best + self.min_delta {
            self.best = metric;
            self.wait = 0;
            return false;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            self.lr *= self.factor;
            self.wait = 0;
            return true;
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_psnr: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn best_psnr(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.records[e].val_psnr)
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mse,psnr_db,lr\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:.9},{:.6},{}", r.epoch, r.train_mse, r.val_psnr, r.lr);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Replays the recorded PSNRs through a fresh scheduler and returns the
    /// learning rate it would have used for each epoch.
    pub fn replay_lr(&self, cfg: &TrainConfig) -> Vec<f64> {
        let mut sched = PlateauScheduler::from_config(cfg);
        self.records
            .iter()
            .map(|r| {
                let lr = sched.lr;
                sched.observe(r.val_psnr);
                lr
            })
            .collect()
    }
}

/// Deterministic `(train, validation)` index split: a seeded permutation whose
/// tail `floor(n * fraction)` entries form the validation set. When that tail
/// is empty, validation falls back to the training images.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut SeedTree::new(seed).stream(Purpose::Split, 0, 0));
    let n_val = ((n as f64) * fraction).floor() as usize;
    let val = order.split_off(n - n_val.min(n));
    let train = order;
    if val.is_empty() {
        let fallback = train.clone();
        return (train, fallback);
    }
    (train, val)
}

/// Output of [`Trainer::finish`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_network: Network<f32>,
    pub best_network: Network<f32>,
    pub history: TrainHistory,
}

impl TrainOutcome {
    pub fn selected(&self, keep_best: bool) -> &Network<f32> {
        if keep_best {
            &self.best_network
        } else {
            &self.final_network
        }
    }
}

/// Stateful training loop; can be checkpointed and resumed between epochs.
pub struct Trainer {
    cfg: TrainConfig,
    network: Network<f32>,
    best: Network<f32>,
    adam: Adam<f32>,
    scheduler: PlateauScheduler,
    history: TrainHistory,
    images: Vec<GrayImage>,
    train_ids: Vec<usize>,
    validation: Vec<CorruptedSample>,
}

impl Trainer {
    pub fn new(network: Network<f32>, images: Vec<GrayImage>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if images.is_empty() {
            return Err(Error::Dataset("no training images".into()));
        }
        let spec = network.spec();
        if let Some(bad) = images
            .iter()
            .find(|im| im.dims() != (spec.input_height, spec.input_width))
        {
            return Err(Error::shape(
                format!("{}x{}", spec.input_height, spec.input_width),
                format!("{}x{}", bad.height(), bad.width()),
            ));
        }
        let (train_ids, val_ids) = split_indices(images.len(), cfg.val_fraction, cfg.seed);
        let seeds = SeedTree::new(cfg.seed);
        let validation = val_ids
            .iter()
            .map(|&i| {
                corrupt(
                    &images[i],
                    &cfg.corruption,
                    &mut seeds.stream(Purpose::ValidationCorruption, i as u64, 0),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let adam = Adam::new(cfg.adam, &network.group_sizes());
        Ok(Self {
            scheduler: PlateauScheduler::from_config(&cfg),
            best: network.clone(),
            network,
            adam,
            history: TrainHistory::default(),
            images,
            train_ids,
            validation,
            cfg,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn network(&self) -> &Network<f32> {
        &self.network
    }

    pub fn current_lr(&self) -> f64 {
        self.scheduler.lr
    }

    pub fn epochs_done(&self) -> usize {
        self.history.records.len()
    }

    /// Mean PSNR of the current network over the fixed validation samples.
    pub fn validation_psnr(&self) -> Result<f64> {
        let mut total = 0.0;
        for sample in &self.validation {
            let recon = self.network.forward(&sample.input)?;
            total += psnr(recon.image(), &sample.target)?;
        }
        Ok(total / self.validation.len() as f64)
    }

    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        use rand::seq::SliceRandom;
        let epoch = self.epochs_done();
        let seeds = SeedTree::new(self.cfg.seed);
        let lr = self.scheduler.lr;
        let mut order = self.train_ids.clone();
        order.shuffle(&mut seeds.stream(Purpose::Shuffle, 0, epoch as u64));

        let mut grads = self.network.zero_gradients();
        let mut loss_sum = 0.0;
        for (batch_idx, batch) in order.chunks(self.cfg.batch_size).enumerate() {
            grads.reset();
            let mut batch_loss = 0.0;
            for &id in batch {
                let sample = corrupt(
                    &self.images[id],
                    &self.cfg.corruption,
                    &mut seeds.stream(Purpose::Corruption, id as u64, epoch as u64),
                )?;
                let x = image_to_map::<f32>(&sample.input);
                let target = image_to_map::<f32>(&sample.target);
                let mut drop_rng = self
                    .cfg
                    .train_dropout
                    .then(|| seeds.stream(Purpose::Dropout, id as u64, epoch as u64));
                let trace = self.network.forward_trace(&x, drop_rng.as_mut())?;
                let (mse, d_out) = Network::mse_and_grad(&trace.output, &target, batch.len());
                batch_loss += mse;
                self.network.backward(&trace, &d_out, &mut grads);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    lr,
                });
            }
            loss_sum += batch_loss;
            let mut groups = grads.groups_mut();
            if let Some(max_norm) = self.cfg.grad_clip {
                let norm = clip_global_norm(&mut groups, max_norm);
                if !norm.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch_idx,
                        lr,
                    });
                }
            }
            let grad_views: Vec<&[f32]> = groups.iter().map(|g| &g[..]).collect();
            self.adam.step(&mut self.network.param_groups_mut(), &grad_views, lr);
        }

        let train_mse = loss_sum / order.len() as f64;
        let val_psnr = self.validation_psnr()?;
        let record = EpochRecord {
            epoch,
            train_mse,
            val_psnr,
            lr,
        };
        let improved = self.history.best_psnr().is_none_or(|b| val_psnr > b);
        self.history.records.push(record);
        if improved {
            self.history.best_epoch = Some(epoch);
            self.best = self.network.clone();
        }
        if self.scheduler.observe(val_psnr) {
            info!("epoch {epoch}: validation PSNR plateau, learning rate -> {}", self.scheduler.lr);
        }
        debug!("epoch {epoch}: mse {train_mse:.6} psnr {val_psnr:.3} dB lr {lr}");
        Ok(record)
    }

    /// Runs epochs until `cfg.epochs` have completed.
    pub fn run(&mut self) -> Result<()> {
        while self.epochs_done() < self.cfg.epochs {
            let r = self.run_epoch()?;
            if r.epoch % 10 == 0 || r.epoch + 1 == self.cfg.epochs {
                info!(
                    "epoch {}/{}: mse {:.6} psnr {:.2} dB lr {}",
                    r.epoch + 1,
                    self.cfg.epochs,
                    r.train_mse,
                    r.val_psnr,
                    r.lr
                );
            }
        }
        Ok(())
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome {
            final_network: self.network,
            best_network: self.best,
            history: self.history,
        }
    }

    /// Writes everything needed to resume: weights, best weights, Adam
    /// moments, scheduler and history.
    pub fn save_state(&self, path: &Path) -> Result<()> {
        let mut ckpt = Checkpoint::new(self.network.clone());
        for (i, g) in self.best.param_groups().iter().enumerate() {
            ckpt.aux.push((format!("best.{i}"), g.to_vec()));
        }
        for (i, (m, v)) in self.adam.first.iter().zip(&self.adam.second).enumerate() {
            ckpt.aux.push((format!("adam.m.{i}"), m.clone()));
            ckpt.aux.push((format!("adam.v.{i}"), v.clone()));
        }
        ckpt.extra = serde_json::json!({
            "kind": "train-state",
            "adam_steps": self.adam.step_count,
            "scheduler": self.scheduler,
            "history": self.history,
            "config": self.cfg,
        });
        ckpt.save(path)
    }

    /// Restores a state written by [`Trainer::save_state`]. `cfg` may extend
    /// `epochs`; the seed and split must match the original run.
    pub fn resume(path: &Path, images: Vec<GrayImage>, cfg: TrainConfig) -> Result<Self> {
        let ckpt = Checkpoint::load(path)?;
        if ckpt.extra["kind"] != "train-state" {
            return Err(Error::Checkpoint(format!("{} holds no training state", path.display())));
        }
        let saved: TrainConfig = serde_json::from_value(ckpt.extra["config"].clone())?;
        if saved.seed != cfg.seed || saved.val_fraction != cfg.val_fraction {
            return Err(Error::Config("resume requires the original seed and validation split".into()));
        }
        let mut trainer = Trainer::new(ckpt.network.clone(), images, cfg)?;
        let missing = |name: &str| Error::Checkpoint(format!("training state lacks tensor `{name}`"));
        {
            let mut best_groups = trainer.best.param_groups_mut();
            for (i, g) in best_groups.iter_mut().enumerate() {
                let name = format!("best.{i}");
                let t = ckpt.aux_tensor(&name).ok_or_else(|| missing(&name))?;
                g.copy_from_slice(t);
            }
        }
        for i in 0..trainer.adam.first.len() {
            for (prefix, store) in [("adam.m", &mut trainer.adam.first), ("adam.v", &mut trainer.adam.second)] {
                let name = format!("{prefix}.{i}");
                store[i].copy_from_slice(ckpt.aux_tensor(&name).ok_or_else(|| missing(&name))?);
            }
        }
        trainer.adam.step_count = ckpt.extra["adam_steps"].as_u64().unwrap_or(0);
        trainer.scheduler = serde_json::from_value(ckpt.extra["scheduler"].clone())?;
        trainer.history = serde_json::from_value(ckpt.extra["history"].clone())?;
        Ok(trainer)
    }
}

/// Trains `network` on `images` for `cfg.epochs` epochs.
pub fn train_images(network: Network<f32>, images: Vec<GrayImage>, cfg: TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(network, images, cfg)?;
    trainer.run()?;
    Ok(trainer.finish())
}

/// Loads the training images of `index` at the network's resolution and
/// trains; returns the selected weights (best or final) and the history.
pub fn train(
    network: Network<f32>,
    index: &crate::dataset::DatasetIndex,
    cfg: TrainConfig,
) -> Result<(Network<f32>, TrainHistory)> {
    let res = (network.spec().input_height, network.spec().input_width);
    let images = index.load_train(res)?;
    let keep_best = cfg.keep_best;
    let outcome = train_images(network, images, cfg)?;
    let net = outcome.selected(keep_best).clone();
    Ok((net, outcome.history))
}
