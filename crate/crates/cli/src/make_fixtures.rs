use anyhow::Result;
use groupcam::model::dataset::FixtureDatasetSpec;
use groupcam::model::train::{fixture_splits, HELDOUT_SEED_OFFSET};
use groupcam::model::train_fixture_model;

use crate::config::{self, FixturesConfig, CONFIG_FILE};
use crate::io::{create_dir, write_dataset, write_json, DatasetMeta, HELDOUT_DIR};
use crate::FixturesArgs;

pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";

pub fn run(args: &FixturesArgs) -> Result<()> {
    let mut cfg: FixturesConfig = config::load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(n) = args.n {
        cfg.train.train_size = n;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    let t = &cfg.train;
    let (train, heldout) = fixture_splits(t.seed, t.train_size, t.heldout_size)?;

    create_dir(&args.out)?;
    write_json(&args.out.join(CONFIG_FILE), &cfg)?;
    write_dataset(&args.out, &train, &DatasetMeta { spec: FixtureDatasetSpec::new(t.seed), n: train.len() })?;
    let heldout_spec = FixtureDatasetSpec::new(t.seed ^ HELDOUT_SEED_OFFSET);
    write_dataset(&args.out.join(HELDOUT_DIR), &heldout, &DatasetMeta { spec: heldout_spec, n: heldout.len() })?;

    let (model, report) = train_fixture_model(&train, &heldout, t)?;
    model.save(args.out.join(MODEL_FILE))?;
    write_json(&args.out.join(TRAIN_REPORT_FILE), &report)?;
    if args.verbose {
        for e in &report.epochs {
            println!("epoch {:>3}  loss {:.5}  held-out accuracy {:.4}", e.epoch, e.loss, e.heldout_accuracy);
        }
    }
    println!(
        "wrote {} training and {} held-out images to {}; held-out accuracy {:.4}",
        train.len(),
        heldout.len(),
        args.out.display(),
        report.heldout_accuracy
    );
    Ok(())
}
