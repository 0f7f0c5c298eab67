//! Saliency-guided augmentation and a paired fine-tuning run.
//!
//! Each epoch, every training image gets a fresh binary mask from the current model
//! ([`finetune_mask`] with the ground-truth class). Pixels outside the mask are replaced by
//! the blurred image and the network is trained on the result instead of the original.
//! A control run with the same initial weights, data order and optimizer trains on the
//! original images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgproc::{blend, gaussian_blur2d, ImageTensor, Map2D};
use crate::model::train::{accuracy, epoch_order, Sgd};
use crate::model::{ConvNet, ModelAdapter, Sample, Target};
use crate::saliency::{finetune_mask, DEFAULT_KSIZE, DEFAULT_SIGMA, FINETUNE_GROUPS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub groups: usize,
    pub ksize: usize,
    pub sigma: f64,
    /// Chance that a given image is augmented in a given epoch.
    pub apply_probability: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { groups: FINETUNE_GROUPS, ksize: DEFAULT_KSIZE, sigma: DEFAULT_SIGMA, apply_probability: 1.0 }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 {
            return invalid("augmentation needs at least one group");
        }
        if !(0.0..=1.0).contains(&self.apply_probability) {
            return invalid(format!("apply probability {} outside [0, 1]", self.apply_probability));
        }
        Ok(())
    }
}

/// `blend(img, blur(img), mask)`.
pub fn apply_mask(img: &ImageTensor, mask: &Map2D, ksize: usize, sigma: f64) -> Result<ImageTensor> {
    blend(img, &gaussian_blur2d(img, ksize, sigma)?, mask)
}

/// Augmented copy of `img`: keeps the pixels the model attributes to `label`, blurs the rest.
pub fn augment_image(
    adapter: &mut impl ModelAdapter,
    img: &ImageTensor,
    label: usize,
    cfg: &AugmentConfig,
) -> Result<ImageTensor> {
    cfg.validate()?;
    let mask = finetune_mask(adapter, img, label, cfg.groups, cfg.ksize, cfg.sigma)?;
    apply_mask(img, &mask, cfg.ksize, cfg.sigma)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub augment: AugmentConfig,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self { epochs: 5, seed: 0, learning_rate: 0.01, batch_size: 16, augment: AugmentConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub heldout_accuracy: f64,
    /// Fraction of mask pixels that differ from the masks generated by the initial model.
    /// Absent for the control run.
    pub mask_change: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneReport {
    pub config: FinetuneConfig,
    pub initial_accuracy: f64,
    pub augmented: Vec<EpochRecord>,
    pub control: Vec<EpochRecord>,
}

impl FinetuneReport {
    /// Per-epoch curves as CSV rows: `epoch,run,train_loss,heldout_accuracy,mask_change`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,run,train_loss,heldout_accuracy,mask_change\n");
        out.push_str(&format!("0,initial,,{},\n", self.initial_accuracy));
        for (run, rows) in [("augmented", &self.augmented), ("control", &self.control)] {
            for r in rows {
                let change = r.mask_change.map(|c| c.to_string()).unwrap_or_default();
                out.push_str(&format!("{},{run},{},{},{change}\n", r.epoch, r.train_loss, r.heldout_accuracy));
            }
        }
        out
    }
}

/// Output of [`finetune_loop`].
pub struct FinetuneOutcome {
    pub augmented: ConvNet,
    pub control: ConvNet,
    pub report: FinetuneReport,
    /// Masks used in each epoch of the augmented run, indexed `[epoch][sample]`.
    pub masks: Vec<Vec<Map2D>>,
}

fn masks_for(model: &ConvNet, samples: &[Sample], cfg: &AugmentConfig) -> Result<Vec<Map2D>> {
    samples
        .par_iter()
        .map(|s| {
            let mut worker = model.clone();
            finetune_mask(&mut worker, &s.image, s.label, cfg.groups, cfg.ksize, cfg.sigma)
        })
        .collect()
}

fn changed_fraction(a: &[Map2D], b: &[Map2D]) -> f64 {
    let (mut diff, mut total) = (0usize, 0usize);
    for (x, y) in a.iter().zip(b) {
        diff += x.data().iter().zip(y.data()).filter(|(p, q)| p != q).count();
        total += x.len();
    }
    diff as f64 / total.max(1) as f64
}

/// Fine-tunes copies of `model` with and without saliency-guided augmentation.
pub fn finetune_loop(model: &ConvNet, train: &[Sample], heldout: &[Sample], cfg: &FinetuneConfig) -> Result<FinetuneOutcome> {
    cfg.augment.validate()?;
    if train.is_empty() || cfg.batch_size == 0 {
        return invalid("fine-tuning needs samples and a positive batch size");
    }
    let initial_accuracy = accuracy(model, heldout)?;
    let mut augmented = model.clone();
    let mut control = model.clone();
    let mut aug_opt = Sgd::new(cfg.learning_rate, 0.0);
    let mut ctl_opt = Sgd::new(cfg.learning_rate, 0.0);
    let mut report = FinetuneReport { config: cfg.clone(), initial_accuracy, augmented: Vec::new(), control: Vec::new() };
    let mut all_masks: Vec<Vec<Map2D>> = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let masks = masks_for(&augmented, train, &cfg.augment)?;
        let mut coin = ChaCha8Rng::seed_from_u64(cfg.seed);
        coin.set_stream(epoch as u64);
        let inputs = train
            .iter()
            .zip(&masks)
            .map(|(s, m)| {
                if coin.gen::<f64>() < cfg.augment.apply_probability {
                    apply_mask(&s.image, m, cfg.augment.ksize, cfg.augment.sigma)
                } else {
                    Ok(s.image.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let order = epoch_order(train.len(), cfg.seed, epoch);
        let (mut aug_loss, mut ctl_loss) = (0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let aug_batch: Vec<_> = chunk.iter().map(|&i| (&inputs[i], Target::Class(train[i].label))).collect();
            let ctl_batch: Vec<_> = chunk.iter().map(|&i| (&train[i].image, Target::Class(train[i].label))).collect();
            aug_loss += aug_opt.step(&mut augmented, &aug_batch)? * chunk.len() as f64;
            ctl_loss += ctl_opt.step(&mut control, &ctl_batch)? * chunk.len() as f64;
        }
        let n = train.len() as f64;
        let mask_change = all_masks.first().map_or(0.0, |first| changed_fraction(first, &masks));
        report.augmented.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: aug_loss / n,
            heldout_accuracy: accuracy(&augmented, heldout)?,
            mask_change: Some(mask_change),
        });
        report.control.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: ctl_loss / n,
            heldout_accuracy: accuracy(&control, heldout)?,
            mask_change: None,
        });
        all_masks.push(masks);
    }
    Ok(FinetuneOutcome { augmented, control, report, masks: all_masks })
}
