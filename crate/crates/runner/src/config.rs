//! Experiment configuration.
//!
//! The file format is TOML with one table per concern. Every key is optional;
//! missing keys take the desk-scale defaults below. Unknown tables or keys are
//! rejected.
//!
//! ```toml
//! [experiment]
//! name = "walk-sgd"
//! master_seed = 1
//!
//! [data]
//! source = "blobs"          # or "idx" with images/labels paths
//! train_size = 5000
//! holdout = 1000
//!
//! [train]
//! batch_size = 100
//! epochs = 5
//! lr = "auto"               # or a schedule string such as "constant:0.5"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sgd_walk_core::optim::NoiseConfig;

use crate::error::{Result, RunError};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub analysis: AnalysisSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct ExperimentSection {
    pub name: String,
    pub master_seed: u64,
}


#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Blobs,
    Idx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub source: DataSource,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Training samples; the next `holdout` samples form the validation set.
    pub train_size: usize,
    pub holdout: usize,
    pub blobs_classes: usize,
    pub blobs_dim: usize,
    pub blobs_separation: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: DataSource::Blobs,
            images: None,
            labels: None,
            train_size: 5000,
            holdout: 1000,
            blobs_classes: 10,
            blobs_dim: 32,
            blobs_separation: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub init_scale: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { hidden: vec![100], init_scale: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub batch_size: usize,
    pub epochs: u64,
    /// `"auto"` picks the largest stable rate from `lr_grid`; anything else is
    /// parsed as a schedule.
    pub lr: String,
    pub lr_grid: Vec<f64>,
    /// A trial run counts as diverged once any loss exceeds this multiple of the initial loss.
    pub divergence_factor: f64,
    /// Updates per tuning trial.
    pub tune_iterations: u64,
    /// `"none"` or `"iso:FACTOR"`.
    pub noise: String,
    pub eval_period: u64,
    pub drop_last: bool,
    /// Spill trajectories to disk once more than this many records are held.
    pub spill_cap: Option<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            batch_size: 100,
            epochs: 5,
            lr: "auto".into(),
            lr_grid: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            divergence_factor: 10.0,
            tune_iterations: 80,
            noise: "none".into(),
            eval_period: 1,
            drop_last: false,
            spill_cap: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Full-batch updates for GD recipes.
    pub gd_iterations: u64,
    /// Pairs sliced from the start of a run.
    pub slice_iterations: u64,
    /// Also slice every pair of the final epoch.
    pub late_epoch_slices: bool,
    pub significance_rel: f64,
    /// Rate multipliers for height-vs-lr, applied to the tuned SGD rate.
    pub height_lr_factors: Vec<f64>,
    /// Batch sizes for the cosine study; 0 stands for the full dataset.
    pub cosine_batch_sizes: Vec<usize>,
    pub cosine_lr_batch: usize,
    pub cosine_lr_factors: Vec<f64>,
    pub cosine_iterations: u64,
    pub smoothing_window: usize,
    pub iso_factors: Vec<f64>,
    pub iso_iterations: u64,
    pub curvature_period: u64,
    /// Curvature is measured on the first this-many training samples.
    pub curvature_subset: usize,
    pub power_iters: usize,
    pub power_tol: f64,
    pub quad_lambdas: Vec<f64>,
    /// The rate grid is `k / 10` for `k = 1..=quad_eta_steps`.
    pub quad_eta_steps: u32,
    pub quad_steps: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            gd_iterations: 80,
            slice_iterations: 40,
            late_epoch_slices: true,
            significance_rel: sgd_walk_core::metrics::DEFAULT_SIGNIFICANCE_REL,
            height_lr_factors: vec![1.0, 0.5],
            cosine_batch_sizes: vec![0, 16],
            cosine_lr_batch: 16,
            cosine_lr_factors: vec![1.0, 0.5],
            cosine_iterations: 300,
            smoothing_window: 51,
            iso_factors: vec![0.1, 0.05],
            iso_iterations: 200,
            curvature_period: 1,
            curvature_subset: 1000,
            power_iters: 100,
            power_tol: 1e-4,
            quad_lambdas: vec![0.5, 1.0, 2.0],
            quad_eta_steps: 22,
            quad_steps: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            RunError::Config(m) => RunError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Canonical serialized form; the manifest digest is its SHA-256.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RunError::Config(m));
        let d = &self.data;
        if d.train_size < 2 {
            return bad(format!("data.train_size must be at least 2, got {}", d.train_size));
        }
        if d.source == DataSource::Idx && (d.images.is_none() || d.labels.is_none()) {
            return bad("data.source = \"idx\" needs data.images and data.labels".into());
        }
        if d.source == DataSource::Blobs {
            if d.blobs_classes < 2 || d.blobs_dim == 0 {
                return bad("blobs need at least 2 classes and dimension 1".into());
            }
            if !(d.train_size + d.holdout).is_multiple_of(d.blobs_classes) {
                return bad(format!(
                    "train_size + holdout = {} must be a multiple of blobs_classes = {}",
                    d.train_size + d.holdout,
                    d.blobs_classes
                ));
            }
        }
        if self.model.hidden.contains(&0) {
            return bad("model.hidden entries must be positive".into());
        }
        let t = &self.train;
        if t.batch_size == 0 || t.batch_size > d.train_size {
            return bad(format!("train.batch_size must be in 1..={}", d.train_size));
        }
        if t.epochs == 0 || t.eval_period == 0 || t.tune_iterations == 0 {
            return bad("train.epochs, train.eval_period and train.tune_iterations must be positive".into());
        }
        if t.lr_grid.is_empty() || t.lr_grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("train.lr_grid must be a non-empty list of positive rates".into());
        }
        if !(t.divergence_factor > 1.0) {
            return bad("train.divergence_factor must exceed 1".into());
        }
        self.noise()?;
        let a = &self.analysis;
        if a.smoothing_window == 0 || a.curvature_period == 0 || a.power_iters == 0 {
            return bad("analysis.smoothing_window, curvature_period and power_iters must be positive".into());
        }
        if a.cosine_lr_batch == 0 || a.cosine_lr_batch > d.train_size {
            return bad("analysis.cosine_lr_batch out of range".into());
        }
        if a.cosine_batch_sizes.iter().any(|&b| b > d.train_size) {
            return bad("analysis.cosine_batch_sizes exceed the training set".into());
        }
        if a.quad_lambdas.iter().any(|l| !(*l > 0.0)) {
            return bad("analysis.quad_lambdas must be positive".into());
        }
        Ok(())
    }

    pub fn noise(&self) -> Result<NoiseConfig> {
        parse_noise(&self.train.noise, 0)
    }
}

/// `"none"` or `"iso:FACTOR"`; the seed is filled in by the caller.
pub fn parse_noise(text: &str, noise_seed: u64) -> Result<NoiseConfig> {
    let text = text.trim();
    if text == "none" {
        return Ok(NoiseConfig::none());
    }
    if let Some(f) = text.strip_prefix("iso:") {
        let factor: f64 = f
            .parse()
            .map_err(|_| RunError::Config(format!("bad noise factor '{f}'")))?;
        return NoiseConfig::isotropic(factor, noise_seed).map_err(|e| RunError::Config(e.to_string()));
    }
    Err(RunError::Config(format!("noise must be 'none' or 'iso:FACTOR', got '{text}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.train.batch_size, 100);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[train]\nbatchsize = 4\n").unwrap_err();
        assert!(err.to_string().contains("batchsize"), "{err}");
        assert!(ExperimentConfig::from_toml("[extra]\na = 1\n").is_err());
    }

    #[test]
    fn canonical_round_trips() {
        let cfg = ExperimentConfig::from_toml("[experiment]\nname = \"walk-gd\"\nmaster_seed = 9\n").unwrap();
        let again = ExperimentConfig::from_toml(&cfg.canonical()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn noise_strings() {
        assert!(!parse_noise("none", 0).unwrap().is_isotropic());
        assert!(parse_noise("iso:0.1", 3).unwrap().is_isotropic());
        assert!(parse_noise("iso:x", 0).is_err());
        assert!(parse_noise("gauss", 0).is_err());
    }

    #[test]
    fn idx_needs_paths() {
        assert!(ExperimentConfig::from_toml("[data]\nsource = \"idx\"\n").is_err());
    }
}
