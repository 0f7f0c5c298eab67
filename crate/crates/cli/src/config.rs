//! Resolved run configurations.
//!
//! Every command starts from defaults, overlays an optional JSON config file and then
//! overlays command-line flags. The resolved value is written as `config.json` in the
//! output directory.

use std::path::Path;

use anyhow::Result;
use groupcam::evaluation::{CurveConfig, RandomizationMode};
use groupcam::finetune::FinetuneConfig;
use groupcam::model::TrainConfig;
use groupcam::saliency::Method;
use groupcam::GroupCamConfig;
use serde::{Deserialize, Serialize};

use crate::io::read_json;

pub const CONFIG_FILE: &str = "config.json";
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Defaults, or the contents of `path` with missing fields defaulted.
pub fn load<T: Default + for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FixturesConfig {
    /// `train.train_size` is the number of images written to the dataset directory.
    pub train: TrainConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub method: Method,
    /// Explained class; `None` uses the model's prediction.
    pub class: Option<usize>,
    pub saliency: GroupCamConfig,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self { method: Method::GroupCam, class: None, saliency: GroupCamConfig::default(), alpha: DEFAULT_ALPHA, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Auc,
    Pointing,
    Sanity,
}

impl std::str::FromStr for Metric {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auc" => Ok(Metric::Auc),
            "pointing" => Ok(Metric::Pointing),
            "sanity" => Ok(Metric::Sanity),
            other => anyhow::bail!("unknown metric '{other}' (expected auc, pointing or sanity)"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    pub method: Method,
    pub metrics: Vec<Metric>,
    pub saliency: GroupCamConfig,
    pub curve: CurveConfig,
    pub randomization: RandomizationMode,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            method: Method::GroupCam,
            metrics: vec![Metric::Auc, Metric::Pointing, Metric::Sanity],
            saliency: GroupCamConfig::default(),
            curve: CurveConfig::default(),
            randomization: RandomizationMode::Cascade,
            seed: 0,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneRunConfig {
    pub finetune: FinetuneConfig,
    pub render_epochs: bool,
    /// Number of training images rendered per epoch when `render_epochs` is set.
    pub render_count: usize,
    pub alpha: f64,
    pub jobs: usize,
}

impl Default for FinetuneRunConfig {
    fn default() -> Self {
        Self { finetune: FinetuneConfig::default(), render_epochs: false, render_count: 8, alpha: DEFAULT_ALPHA, jobs: 1 }
    }
}
