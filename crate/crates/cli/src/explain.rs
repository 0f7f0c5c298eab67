use anyhow::{bail, Result};
use groupcam::colormap::colormap_overlay;
use groupcam::model::{argmax, ConvNet};
use groupcam::persist::{write_grid, SaliencySidecar};
use groupcam::saliency::{grad_cam, group_cam, Method};
use groupcam::ModelAdapter;

use crate::config::{self, ExplainConfig, CONFIG_FILE};
use crate::io::{create_dir, read_png, write_json, write_map_png, write_png};
use crate::ExplainArgs;

pub const GRID_FILE: &str = "saliency.grid";
pub const SIDECAR_FILE: &str = "saliency.json";
pub const MAP_PNG: &str = "saliency.png";
pub const OVERLAY_PNG: &str = "overlay.png";
pub const GROUPS_CSV: &str = "groups.csv";

pub fn run(args: &ExplainArgs) -> Result<()> {
    let mut cfg: ExplainConfig = config::load(args.config.as_deref())?;
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if args.class.is_some() {
        cfg.class = args.class;
    }
    args.saliency.apply(&mut cfg.saliency);
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.saliency.validate()?;
    if !(0.0..=1.0).contains(&cfg.alpha) {
        bail!("overlay alpha {} outside [0, 1]", cfg.alpha);
    }

    let mut model = ConvNet::load(&args.model)?;
    let image = read_png(&args.image)?;
    let class = match cfg.class {
        Some(c) if c >= model.num_classes() => {
            bail!("class index {c} out of range for {} classes", model.num_classes())
        }
        Some(c) => c,
        None => argmax(&model.class_scores(std::slice::from_ref(&image))?[0]),
    };
    cfg.class = Some(class);

    let (saliency, groups) = match cfg.method {
        Method::GroupCam => {
            let (map, scores) = group_cam(&mut model, &image, class, &cfg.saliency)?;
            (map, Some(scores))
        }
        Method::GradCam => (grad_cam(&mut model, &image, class, cfg.saliency.layer_id.as_deref())?, None),
    };

    create_dir(&args.out)?;
    write_json(&args.out.join(CONFIG_FILE), &cfg)?;
    write_grid(args.out.join(GRID_FILE), &saliency)?;
    let sidecar = SaliencySidecar {
        method: cfg.method.to_string(),
        class_index: class,
        config: serde_json::to_value(&cfg.saliency)?,
    };
    write_json(&args.out.join(SIDECAR_FILE), &sidecar)?;
    write_map_png(&args.out.join(MAP_PNG), &saliency)?;
    write_png(&args.out.join(OVERLAY_PNG), &colormap_overlay(&image, &saliency, cfg.alpha)?)?;

    if let Some(scores) = &groups {
        let mut w = csv::Writer::from_path(args.out.join(GROUPS_CSV))?;
        w.write_record(["group", "alpha"])?;
        for s in scores {
            w.write_record([s.group.to_string(), s.alpha.to_string()])?;
        }
        w.flush()?;
        if args.verbose {
            println!("group  alpha");
            for s in scores {
                println!("{:>5}  {:+.6}", s.group, s.alpha);
            }
        }
    }
    println!("{} saliency for class {class} written to {}", cfg.method, args.out.display());
    Ok(())
}
