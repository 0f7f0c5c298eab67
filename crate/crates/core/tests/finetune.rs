mod common;

use common::{random_image, rng, small_net};
use groupcam::finetune::{apply_mask, augment_image, finetune_loop, AugmentConfig, FinetuneConfig};
use groupcam::imgproc::gaussian_blur2d;
use groupcam::model::{generate_fixture_dataset, FixtureDatasetSpec, Sample};
use groupcam::{Counting, Map2D, ModelAdapter};
use rand::Rng;

fn small_samples(seed: u64, n: usize) -> Vec<Sample> {
    let spec = FixtureDatasetSpec { channels: 3, height: 16, width: 16, seed };
    generate_fixture_dataset(&spec, n).unwrap()
}

fn config(epochs: usize) -> FinetuneConfig {
    FinetuneConfig {
        epochs,
        seed: 3,
        batch_size: 4,
        augment: AugmentConfig { groups: 4, ksize: 5, sigma: 2.0, apply_probability: 1.0 },
        ..Default::default()
    }
}

#[test]
fn zero_epochs_returns_the_input_model() {
    let net = small_net(1);
    let (train, heldout) = (small_samples(1, 8), small_samples(2, 6));
    let out = finetune_loop(&net, &train, &heldout, &config(0)).unwrap();
    assert_eq!(out.augmented, net);
    assert_eq!(out.control, net);
    assert!(out.report.augmented.is_empty() && out.report.control.is_empty());
    assert!(out.masks.is_empty());
    assert_eq!(out.report.to_csv().lines().count(), 2);
}

#[test]
fn runs_are_reproducible_and_paired() {
    let net = small_net(2);
    let (train, heldout) = (small_samples(3, 12), small_samples(4, 8));
    let cfg = config(3);
    let a = finetune_loop(&net, &train, &heldout, &cfg).unwrap();
    let b = finetune_loop(&net, &train, &heldout, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
    assert_eq!(a.augmented, b.augmented);
    assert_eq!(a.report.augmented.len(), 3);
    assert_eq!(a.report.control.len(), 3);
    assert_eq!(a.report.augmented[0].mask_change, Some(0.0));
    assert!(a.report.control.iter().all(|r| r.mask_change.is_none()));
    assert_eq!(a.masks.len(), 3);
    for epoch in &a.masks {
        assert_eq!(epoch.len(), train.len());
        for m in epoch {
            assert!(m.data().iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }
    assert_ne!(a.augmented, a.control);

    let other = FinetuneConfig { seed: 4, ..cfg };
    let c = finetune_loop(&net, &train, &heldout, &other).unwrap();
    assert_ne!(c.augmented, a.augmented);
}

#[test]
fn never_augmenting_matches_the_control_run() {
    let net = small_net(3);
    let (train, heldout) = (small_samples(5, 8), small_samples(6, 4));
    let mut cfg = config(2);
    cfg.augment.apply_probability = 0.0;
    let out = finetune_loop(&net, &train, &heldout, &cfg).unwrap();
    assert_eq!(out.augmented, out.control);
}

#[test]
fn masks_keep_original_pixels_and_blur_the_rest() {
    let mut r = rng(51);
    let img = random_image(&mut r, 3, 16, 16);
    let mask = Map2D::from_fn(16, 16, |_, _| f64::from(u8::from(r.gen_bool(0.4))));
    let out = apply_mask(&img, &mask, 5, 2.0).unwrap();
    let blurred = gaussian_blur2d(&img, 5, 2.0).unwrap();
    for c in 0..3 {
        for y in 0..16 {
            for x in 0..16 {
                let want = if mask.get(y, x) == 1.0 { img.get(c, y, x) } else { blurred.get(c, y, x) };
                assert_eq!(out.get(c, y, x), want);
            }
        }
    }
}

#[test]
fn augmenting_one_image_costs_groups_plus_one_queries() {
    let mut net = Counting::new(small_net(4));
    let img = random_image(&mut rng(52), 3, 16, 16);
    let cfg = AugmentConfig { groups: 4, ksize: 5, sigma: 2.0, apply_probability: 1.0 };
    augment_image(&mut net, &img, 1, &cfg).unwrap();
    assert_eq!(net.query_count(), 5);
    assert!(augment_image(&mut net, &img, 1, &AugmentConfig { groups: 0, ..cfg.clone() }).is_err());
    assert!(augment_image(&mut net, &img, 1, &AugmentConfig { groups: 9, ..cfg }).is_err());
}

#[test]
fn bad_inputs_are_rejected() {
    let net = small_net(5);
    let heldout = small_samples(7, 4);
    assert!(finetune_loop(&net, &[], &heldout, &config(1)).is_err());
    let mut cfg = config(1);
    cfg.batch_size = 0;
    assert!(finetune_loop(&net, &small_samples(8, 4), &heldout, &cfg).is_err());
    let mut cfg = config(1);
    cfg.augment.apply_probability = 1.5;
    assert!(finetune_loop(&net, &small_samples(8, 4), &heldout, &cfg).is_err());
}
