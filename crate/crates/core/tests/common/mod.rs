//! Shared helpers for the integration tests.
#![allow(dead_code)]

pub mod oracle;

use std::sync::OnceLock;

use groupcam::model::train::{fixture_splits, train_fixture_model};
use groupcam::model::{ConvNet, NetConfig, Sample, TrainConfig, TrainReport};
use groupcam::ImageTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub model: ConvNet,
    pub report: TrainReport,
    pub train: Vec<Sample>,
    pub heldout: Vec<Sample>,
}

/// The default fixture classifier, trained once per test binary.
pub fn trained() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let cfg = TrainConfig::default();
        let (train, heldout) = fixture_splits(cfg.seed, cfg.train_size, cfg.heldout_size).expect("fixture splits");
        let (model, report) = train_fixture_model(&train, &heldout, &cfg).expect("fixture training");
        Fixture { model, report, train, heldout }
    })
}

/// An untrained network small enough for exhaustive checks.
pub fn small_net(seed: u64) -> ConvNet {
    let cfg = NetConfig {
        input_channels: 3,
        input_height: 16,
        input_width: 16,
        conv_channels: vec![4, 8],
        hidden: vec![6],
        classes: 3,
    };
    ConvNet::new(cfg, seed).expect("valid config")
}

pub fn random_image(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> ImageTensor {
    let data = (0..c * h * w).map(|_| rng.gen::<f64>()).collect();
    ImageTensor::new(c, h, w, data).expect("shape matches data")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
