use anyhow::{anyhow, bail, Result};
use groupcam::evaluation::{
    deletion_curve, insertion_curve, overall_score, pointing_game, sanity_check, LayerSimilarity, PointingResult,
    SanityReport,
};
use groupcam::model::{argmax, ConvNet};
use groupcam::persist::category_name;
use groupcam::saliency::{grad_cam, group_cam, Method, SaliencyMap};
use groupcam::ModelAdapter;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, EvaluateConfig, Metric, CONFIG_FILE};
use crate::io::{create_dir, load_dataset, write_json, DatasetItem};
use crate::{with_jobs, EvaluateArgs};

pub const AUC_CSV: &str = "auc.csv";
pub const POINTING_CSV: &str = "pointing.csv";
pub const SANITY_JSON: &str = "sanity.json";
pub const SANITY_IMAGES_JSON: &str = "sanity_images.json";
pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub images: usize,
    pub method: Method,
    pub mean_insertion: Option<f64>,
    pub mean_deletion: Option<f64>,
    pub mean_overall: Option<f64>,
    pub pointing_accuracy: Option<f64>,
    /// Mean similarity per randomized layer.
    pub sanity: Option<SanityReport>,
}

#[derive(Serialize)]
struct SanityEntry<'a> {
    image_id: &'a str,
    report: &'a SanityReport,
}

struct ImageResult {
    curves: Option<(f64, f64)>,
    pointing: Option<Vec<(String, bool)>>,
    sanity: Option<SanityReport>,
}

fn explain(model: &mut ConvNet, item: &DatasetItem, class: usize, cfg: &EvaluateConfig) -> Result<SaliencyMap> {
    Ok(match cfg.method {
        Method::GroupCam => group_cam(model, &item.image, class, &cfg.saliency)?.0,
        Method::GradCam => grad_cam(model, &item.image, class, cfg.saliency.layer_id.as_deref())?,
    })
}

fn evaluate_image(model: &ConvNet, item: &DatasetItem, cfg: &EvaluateConfig) -> Result<ImageResult> {
    let mut model = model.clone();
    let class = match item.label {
        Some(l) => l,
        None => argmax(&model.class_scores(std::slice::from_ref(&item.image))?[0]),
    };
    let saliency = explain(&mut model, item, class, cfg)?;
    let want = |m: Metric| cfg.metrics.contains(&m);

    let curves = if want(Metric::Auc) {
        let ins = insertion_curve(&mut model, &item.image, &saliency, class, &cfg.curve)?;
        let del = deletion_curve(&mut model, &item.image, &saliency, class, &cfg.curve)?;
        Some((ins.auc, del.auc))
    } else {
        None
    };
    let pointing = if want(Metric::Pointing) {
        let category = category_name(class);
        let boxes: Vec<_> = item.boxes.iter().filter(|(c, _)| *c == category).cloned().collect();
        if boxes.is_empty() {
            bail!("image {} has no '{category}' annotation for the pointing game", item.id);
        }
        Some(pointing_game(&saliency, &boxes)?)
    } else {
        None
    };
    let sanity = if want(Metric::Sanity) {
        Some(sanity_check(&mut model, &item.image, class, &cfg.saliency, cfg.randomization, cfg.seed)?)
    } else {
        None
    };
    Ok(ImageResult { curves, pointing, sanity })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-layer mean similarity over images.
fn mean_report(reports: &[&SanityReport]) -> Option<SanityReport> {
    let first = reports.first()?;
    let layers = first
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| LayerSimilarity {
            layer_id: l.layer_id.clone(),
            similarity: reports.iter().map(|r| r.layers[i].similarity).sum::<f64>() / reports.len() as f64,
        })
        .collect();
    Some(SanityReport { mode: first.mode, layers })
}

pub fn run(args: &EvaluateArgs) -> Result<()> {
    let mut cfg: EvaluateConfig = config::load(args.config.as_deref())?;
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(m) = &args.metrics {
        cfg.metrics = m.clone();
    }
    args.saliency.apply(&mut cfg.saliency);
    if let Some(sf) = args.step_fraction {
        cfg.curve.step_fraction = sf;
    }
    if args.saliency.ksize.is_some() || args.saliency.sigma.is_some() {
        cfg.curve.ksize = cfg.saliency.ksize;
        cfg.curve.sigma = cfg.saliency.sigma;
    }
    if let Some(r) = args.randomization {
        cfg.randomization = r;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.metrics.sort();
    cfg.metrics.dedup();
    cfg.saliency.validate()?;
    groupcam::evaluation::curve_steps(cfg.curve.step_fraction)?;

    let model = ConvNet::load(&args.model)?;
    let items = load_dataset(&args.dataset)?;
    if items.is_empty() {
        bail!("dataset {} lists no images", args.dataset.display());
    }
    create_dir(&args.out)?;
    write_json(&args.out.join(CONFIG_FILE), &cfg)?;

    let results = with_jobs(cfg.jobs, || {
        items.par_iter().map(|item| evaluate_image(&model, item, &cfg)).collect::<Result<Vec<_>>>()
    })??;

    let mut summary = Summary {
        images: items.len(),
        method: cfg.method,
        mean_insertion: None,
        mean_deletion: None,
        mean_overall: None,
        pointing_accuracy: None,
        sanity: None,
    };

    if cfg.metrics.contains(&Metric::Auc) {
        let mut w = csv::Writer::from_path(args.out.join(AUC_CSV))?;
        w.write_record(["image_id", "method", "insertion_auc", "deletion_auc", "overall"])?;
        let mut pairs = Vec::with_capacity(items.len());
        for (item, r) in items.iter().zip(&results) {
            let (ins, del) = r.curves.ok_or_else(|| anyhow!("missing curves for {}", item.id))?;
            pairs.push((ins, del));
            let overall = overall_score(ins, del);
            w.write_record([item.id.clone(), cfg.method.to_string(), ins.to_string(), del.to_string(), overall.to_string()])?;
        }
        w.flush()?;
        let (ins, del) = (mean(pairs.iter().map(|p| p.0)), mean(pairs.iter().map(|p| p.1)));
        summary.mean_insertion = ins;
        summary.mean_deletion = del;
        summary.mean_overall = ins.zip(del).map(|(i, d)| overall_score(i, d));
    }

    if cfg.metrics.contains(&Metric::Pointing) {
        let mut tally = PointingResult::default();
        for r in &results {
            tally.record_all(r.pointing.as_deref().unwrap_or_default());
        }
        let mut w = csv::Writer::from_path(args.out.join(POINTING_CSV))?;
        w.write_record(["category", "hits", "misses", "accuracy"])?;
        let (mut hits, mut misses) = (0, 0);
        for (category, hm) in &tally.categories {
            hits += hm.hits;
            misses += hm.misses;
            w.write_record([category.clone(), hm.hits.to_string(), hm.misses.to_string(), hm.accuracy().to_string()])?;
        }
        let accuracy = tally.mean_accuracy();
        w.write_record(["mean".to_string(), hits.to_string(), misses.to_string(), accuracy.to_string()])?;
        w.flush()?;
        summary.pointing_accuracy = Some(accuracy);
    }

    if cfg.metrics.contains(&Metric::Sanity) {
        let reports: Vec<&SanityReport> = results.iter().filter_map(|r| r.sanity.as_ref()).collect();
        let per_image: Vec<SanityEntry> =
            items.iter().zip(&reports).map(|(item, report)| SanityEntry { image_id: &item.id, report }).collect();
        write_json(&args.out.join(SANITY_IMAGES_JSON), &per_image)?;
        let averaged = mean_report(&reports).ok_or_else(|| anyhow!("no sanity reports"))?;
        write_json(&args.out.join(SANITY_JSON), &averaged)?;
        summary.sanity = Some(averaged);
    }

    write_json(&args.out.join(SUMMARY_JSON), &summary)?;
    print_summary(&summary, args.verbose);
    Ok(())
}

fn print_summary(s: &Summary, verbose: bool) {
    println!("{} images, method {}", s.images, s.method);
    if let (Some(i), Some(d), Some(o)) = (s.mean_insertion, s.mean_deletion, s.mean_overall) {
        println!("mean insertion AUC {i:.4}  mean deletion AUC {d:.4}  over-all {o:.4}");
    }
    if let Some(p) = s.pointing_accuracy {
        println!("pointing-game accuracy {p:.4}");
    }
    if let Some(r) = &s.sanity {
        if verbose {
            for l in &r.layers {
                println!("sanity {:>8}  mean similarity {:+.4}", l.layer_id, l.similarity);
            }
        } else if let Some(last) = r.layers.last() {
            println!("sanity: mean similarity after randomizing through {} is {:+.4}", last.layer_id, last.similarity);
        }
    }
}
