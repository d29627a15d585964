//! Declarative run configuration shared by every CLI command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{scan_mvtec, DatasetIndex, SyntheticDatasetSpec};
use crate::detection::MapKind;
use crate::error::{Error, Result};
use crate::evaluation::EvalConfig;
use crate::model::ModelSpec;
use crate::training::TrainConfig;

/// Environment variable that overrides `dataset.root`.
pub const DATA_ROOT_ENV: &str = "AESC_DATA_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StrategyChoice {
    Residual,
    Uncertainty,
    Both,
}

impl StrategyChoice {
    pub fn kinds(self) -> Vec<MapKind> {
        match self {
            StrategyChoice::Residual => vec![MapKind::Residual],
            StrategyChoice::Uncertainty => vec![MapKind::Uncertainty],
            StrategyChoice::Both => vec![MapKind::Residual, MapKind::Uncertainty],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Directory holding `<category>/train`, `<category>/test`, ...
    #[serde(default)]
    pub root: Option<PathBuf>,
    /// Category to use; with `synthetic` it defaults to the generator name.
    #[serde(default)]
    pub category: Option<String>,
    /// Procedural dataset written by `synth-data` under `root`.
    #[serde(default)]
    pub synthetic: Option<SyntheticDatasetSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSection {
    pub strategy: StrategyChoice,
    pub p: f64,
    pub passes: usize,
}

impl Default for DetectSection {
    fn default() -> Self {
        Self {
            strategy: StrategyChoice::Both,
            p: 2.0,
            passes: crate::model::MC_PASSES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub image_wise: bool,
    pub pixel_wise: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            image_wise: true,
            pixel_wise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; there is no clock-derived fallback.
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default = "ModelSpec::aesc")]
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub detect: DetectSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn hex12(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(6).map(|b| format!("{b:02x}")).collect()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        Ok(cfg.normalized())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The training stream seed always follows the run seed.
    pub fn normalized(mut self) -> Self {
        self.train.seed = self.seed;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.normalized()
    }

    /// Applies `AESC_DATA_ROOT` if it is set and nonempty.
    pub fn with_env_root(mut self) -> Self {
        if let Some(root) = std::env::var_os(DATA_ROOT_ENV).filter(|v| !v.is_empty()) {
            self.dataset.root = Some(PathBuf::from(root));
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if !(self.detect.p >= 1.0) {
            return Err(Error::Config(format!("detect.p = {} must be >= 1", self.detect.p)));
        }
        if self.detect.passes < 2 {
            return Err(Error::Config("detect.passes must be at least 2".into()));
        }
        if let Some(s) = &self.dataset.synthetic {
            s.validate()?;
        }
        Ok(())
    }

    /// Digest of the whole configuration.
    pub fn hash(&self) -> String {
        hex12(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// Digest of what determines trained weights: seed, data, model and
    /// training settings except the epoch budget, so that extending a run
    /// keeps its file names.
    pub fn train_hash(&self) -> String {
        let mut train = self.train.clone();
        train.epochs = 0;
        let key = serde_json::json!({
            "seed": self.seed,
            "dataset": self.dataset,
            "model": self.model,
            "train": train,
        });
        hex12(&serde_json::to_vec(&key).expect("config serializes"))
    }

    pub fn data_root(&self) -> Result<PathBuf> {
        match (&self.dataset.root, &self.dataset.synthetic) {
            (Some(root), _) => Ok(root.clone()),
            (None, Some(_)) => Ok(self.output_dir.join("data")),
            (None, None) => Err(Error::Config(format!(
                "dataset.root is not set (set it in the config or via {DATA_ROOT_ENV})"
            ))),
        }
    }

    pub fn category(&self) -> Result<String> {
        if let Some(c) = &self.dataset.category {
            return Ok(c.clone());
        }
        match &self.dataset.synthetic {
            Some(s) => Ok(s.category()),
            None => Err(Error::Config("dataset.category is not set".into())),
        }
    }

    /// Synthetic spec with its category pinned to the configured one.
    pub fn synthetic_spec(&self) -> Result<SyntheticDatasetSpec> {
        let mut spec = self
            .dataset
            .synthetic
            .clone()
            .ok_or_else(|| Error::Config("dataset.synthetic is not set".into()))?;
        spec.category = Some(self.category()?);
        Ok(spec)
    }

    /// Indexes the dataset at the model's input resolution.
    pub fn dataset_index(&self) -> Result<DatasetIndex> {
        let root = self.data_root()?;
        if !root.is_dir() {
            return Err(Error::Dataset(format!("dataset root {} does not exist", root.display())));
        }
        let index = scan_mvtec(&root, &self.category()?)?;
        Ok(index.with_resolution((self.model.input_height, self.model.input_width)))
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            strategies: self.detect.strategy.kinds(),
            image_wise: self.eval.image_wise,
            pixel_wise: self.eval.pixel_wise,
            p: self.detect.p,
            passes: self.detect.passes,
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}_model.ckpt", self.train_hash()))
    }

    pub fn state_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}_state.ckpt", self.train_hash()))
    }

    pub fn history_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}_history.csv", self.train_hash()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"seed": 5, "output_dir": "out", "dataset": {"root": "data", "category": "grid"}}"#;

    #[test]
    fn defaults_and_seed_propagation() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.model, ModelSpec::aesc());
        assert_eq!(cfg.train.seed, 5);
        assert_eq!(cfg.detect.passes, 30);
        assert_eq!(cfg.with_seed(9).train.seed, 9);
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(RunConfig::from_json(r#"{"output_dir": "out"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"seed": 1, "output_dir": "o", "bogus": 1}"#).is_err());
    }

    #[test]
    fn hashes() {
        let a = RunConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        b.train.epochs += 10;
        assert_eq!(a.train_hash(), b.train_hash());
        assert_ne!(a.hash(), b.hash());
        b.train.learning_rate = 0.5;
        assert_ne!(a.train_hash(), b.train_hash());
        assert_eq!(a.hash().len(), 12);
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        cfg.validate().unwrap();
        cfg.detect.passes = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        cfg.model.channel_plan.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::from_json(MINIMAL).unwrap();
        cfg.dataset.root = None;
        assert!(matches!(cfg.data_root(), Err(Error::Config(_))));
    }
}
