//! Mini-batch SGD for [`ConvNet`] on the synthetic shapes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{generate_fixture_dataset, FixtureDatasetSpec, Sample};
use super::network::{ConvNet, NetConfig, Target};
use crate::error::{invalid, Error, Result};
use crate::imgproc::{gaussian_blur2d, ImageTensor};
use crate::saliency::{DEFAULT_KSIZE, DEFAULT_SIGMA};

/// Offset mixed into the seed for the held-out split so it never shares a stream with training.
pub const HELDOUT_SEED_OFFSET: u64 = 0x5eed_0ff5e7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub train_size: usize,
    pub heldout_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Adam step size.
    pub learning_rate: f64,
    pub min_accuracy: f64,
    /// Blurred copies of this fraction of the training images are added with a uniform
    /// target, so an image without shape detail carries no class evidence.
    pub blurred_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train_size: 480,
            heldout_size: 200,
            epochs: 10,
            batch_size: 16,
            learning_rate: 3e-3,
            min_accuracy: 0.95,
            blurred_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub heldout_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub initial_accuracy: f64,
    pub epochs: Vec<EpochStats>,
    pub heldout_accuracy: f64,
}

/// Training and held-out splits for a seed. The held-out split uses a different dataset seed.
pub fn fixture_splits(seed: u64, train_size: usize, heldout_size: usize) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let train = generate_fixture_dataset(&FixtureDatasetSpec::new(seed), train_size)?;
    let heldout = generate_fixture_dataset(&FixtureDatasetSpec::new(seed ^ HELDOUT_SEED_OFFSET), heldout_size)?;
    Ok((train, heldout))
}

/// Fraction of samples whose predicted class equals the label.
pub fn accuracy(net: &ConvNet, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return invalid("accuracy of an empty sample set");
    }
    let correct = samples
        .par_iter()
        .map(|s| net.predict(&s.image).map(|p| usize::from(p == s.label)))
        .collect::<Result<Vec<_>>>()?;
    Ok(correct.iter().sum::<usize>() as f64 / samples.len() as f64)
}

/// Mean loss and summed gradient of a batch.
///
/// Per-sample gradients may be computed in parallel but are summed in batch order, so the
/// result does not depend on the thread count.
fn batch_gradient(net: &ConvNet, batch: &[(&ImageTensor, Target)]) -> Result<(f64, ConvNet)> {
    let per_sample = batch
        .par_iter()
        .map(|&(img, target)| {
            let mut g = net.zeros_like();
            let loss = net.accumulate_gradients(img, target, &mut g)?;
            Ok((loss, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = net.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &per_sample {
        loss += l;
        for (acc, part) in total.params_mut().into_iter().zip(g.params()) {
            for (a, p) in acc.iter_mut().zip(part) {
                *a += p;
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for p in total.params_mut() {
        p.iter_mut().for_each(|v| *v *= scale);
    }
    Ok((loss * scale, total))
}

fn check_finite(net: &ConvNet, loss: f64) -> Result<f64> {
    if !loss.is_finite() || net.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::Training("loss diverged to a non-finite value".into()));
    }
    Ok(loss)
}

/// SGD with optional momentum (`momentum = 0` is plain SGD).
#[derive(Clone, Debug)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Option<ConvNet>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64) -> Self {
        Self { learning_rate, momentum, velocity: None }
    }

    /// One update from a batch of labelled images; returns the mean loss.
    pub fn step(&mut self, net: &mut ConvNet, batch: &[(&ImageTensor, Target)]) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let (loss, grad) = batch_gradient(net, batch)?;
        let velocity = self.velocity.get_or_insert_with(|| net.zeros_like());
        for ((param, vel), g) in net.params_mut().into_iter().zip(velocity.params_mut()).zip(grad.params()) {
            for ((p, v), g) in param.iter_mut().zip(vel.iter_mut()).zip(g) {
                *v = self.momentum * *v + g;
                *p -= self.learning_rate * *v;
            }
        }
        check_finite(net, loss)
    }
}

/// Adam with the usual bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    moments: Option<(ConvNet, ConvNet)>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, moments: None }
    }

    pub fn step(&mut self, net: &mut ConvNet, batch: &[(&ImageTensor, Target)]) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let (loss, grad) = batch_gradient(net, batch)?;
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let (m, v) = self.moments.get_or_insert_with(|| (net.zeros_like(), net.zeros_like()));
        let tensors = net.params_mut().into_iter().zip(m.params_mut()).zip(v.params_mut()).zip(grad.params());
        for (((param, m), v), g) in tensors {
            for (((p, m), v), g) in param.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
        check_finite(net, loss)
    }
}

/// Epoch order of sample indices; a pure function of (seed, epoch).
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Trains a fresh fixture network; fails if held-out accuracy ends below `min_accuracy`.
pub fn train_fixture_model(train: &[Sample], heldout: &[Sample], config: &TrainConfig) -> Result<(ConvNet, TrainReport)> {
    if train.is_empty() || config.batch_size == 0 {
        return invalid("training needs samples and a positive batch size");
    }
    let first = &train[0].image;
    let net_config = NetConfig {
        input_channels: first.channels(),
        input_height: first.height(),
        input_width: first.width(),
        ..NetConfig::fixture()
    };
    let mut net = ConvNet::new(net_config, config.seed)?;
    let mut opt = Adam::new(config.learning_rate);
    let initial_accuracy = accuracy(&net, heldout)?;

    let n_blurred = (config.blurred_fraction.clamp(0.0, 1.0) * train.len() as f64).round() as usize;
    let blurred = train
        .par_iter()
        .take(n_blurred)
        .map(|s| gaussian_blur2d(&s.image, DEFAULT_KSIZE, DEFAULT_SIGMA))
        .collect::<Result<Vec<_>>>()?;
    let mut inputs: Vec<(&ImageTensor, Target)> = train.iter().map(|s| (&s.image, Target::Class(s.label))).collect();
    inputs.extend(blurred.iter().map(|b| (b, Target::Uniform)));

    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = epoch_order(inputs.len(), config.seed, epoch);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| inputs[i]).collect();
            loss_sum += opt.step(&mut net, &batch)? * batch.len() as f64;
        }
        epochs.push(EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / inputs.len() as f64,
            heldout_accuracy: accuracy(&net, heldout)?,
        });
    }
    let heldout_accuracy = epochs.last().map_or(initial_accuracy, |e| e.heldout_accuracy);
    if heldout_accuracy < config.min_accuracy {
        return Err(Error::Training(format!(
            "held-out accuracy {heldout_accuracy:.4} below required {:.2}",
            config.min_accuracy
        )));
    }
    Ok((net, TrainReport { config: config.clone(), initial_accuracy, epochs, heldout_accuracy }))
}

/// Generates the splits for `config.seed` and trains on them.
pub fn train_default(config: &TrainConfig) -> Result<(ConvNet, TrainReport)> {
    let (train, heldout) = fixture_splits(config.seed, config.train_size, config.heldout_size)?;
    train_fixture_model(&train, &heldout, config)
}
