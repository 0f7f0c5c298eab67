use anyhow::{bail, Context, Result};
use groupcam::colormap::colormap_overlay;
use groupcam::finetune::finetune_loop;
use groupcam::model::ConvNet;

use crate::config::{self, FinetuneRunConfig, CONFIG_FILE};
use crate::io::{create_dir, load_samples, write_json, write_png, HELDOUT_DIR};
use crate::{with_jobs, FinetuneArgs};

pub const REPORT_JSON: &str = "report.json";
pub const CURVES_CSV: &str = "curves.csv";
pub const AUGMENTED_MODEL: &str = "model_augmented.json";
pub const CONTROL_MODEL: &str = "model_control.json";
pub const EPOCHS_DIR: &str = "epochs";

pub fn run(args: &FinetuneArgs) -> Result<()> {
    let mut cfg: FinetuneRunConfig = config::load(args.config.as_deref())?;
    let ft = &mut cfg.finetune;
    if let Some(e) = args.epochs {
        ft.epochs = e;
    }
    if let Some(s) = args.seed {
        ft.seed = s;
    }
    if let Some(g) = args.groups {
        ft.augment.groups = g;
    }
    if let Some(k) = args.ksize {
        ft.augment.ksize = k;
    }
    if let Some(s) = args.sigma {
        ft.augment.sigma = s;
    }
    if args.render_epochs {
        cfg.render_epochs = true;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    cfg.finetune.augment.validate()?;
    if !(0.0..=1.0).contains(&cfg.alpha) {
        bail!("overlay alpha {} outside [0, 1]", cfg.alpha);
    }

    let model = ConvNet::load(&args.model)?;
    let train = load_samples(&args.dataset)?;
    let heldout_dir = args.dataset.join(HELDOUT_DIR);
    let heldout = load_samples(&heldout_dir)
        .with_context(|| format!("loading held-out images from {}", heldout_dir.display()))?;
    create_dir(&args.out)?;
    write_json(&args.out.join(CONFIG_FILE), &cfg)?;

    let outcome = with_jobs(cfg.jobs, || finetune_loop(&model, &train, &heldout, &cfg.finetune))??;
    write_json(&args.out.join(REPORT_JSON), &outcome.report)?;
    std::fs::write(args.out.join(CURVES_CSV), outcome.report.to_csv())?;
    outcome.augmented.save(args.out.join(AUGMENTED_MODEL))?;
    outcome.control.save(args.out.join(CONTROL_MODEL))?;

    if cfg.render_epochs {
        for (epoch, masks) in outcome.masks.iter().enumerate() {
            let dir = args.out.join(EPOCHS_DIR).join(format!("epoch_{:03}", epoch + 1));
            create_dir(&dir)?;
            for (sample, mask) in train.iter().zip(masks).take(cfg.render_count) {
                let overlay = colormap_overlay(&sample.image, mask, cfg.alpha)?;
                write_png(&dir.join(format!("{}.png", sample.id)), &overlay)?;
            }
        }
    }

    let report = &outcome.report;
    if args.verbose {
        print!("{}", report.to_csv());
    }
    let last = |rows: &[groupcam::finetune::EpochRecord]| rows.last().map_or(report.initial_accuracy, |r| r.heldout_accuracy);
    println!(
        "initial held-out accuracy {:.4}; after {} epochs: augmented {:.4}, control {:.4}",
        report.initial_accuracy,
        report.augmented.len(),
        last(&report.augmented),
        last(&report.control)
    );
    Ok(())
}
