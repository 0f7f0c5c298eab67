//! PNG, JSON and dataset-directory helpers.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use groupcam::model::dataset::FixtureDatasetSpec;
use groupcam::model::{BBox, Sample};
use groupcam::persist::{parse_annotations, FixtureEntry, FixtureIndex};
use groupcam::{ImageTensor, Map2D};
use serde::{Deserialize, Serialize};

pub const INDEX_FILE: &str = "index.json";
pub const IMAGES_DIR: &str = "images";
pub const HELDOUT_DIR: &str = "heldout";
pub const DATASET_META: &str = "dataset.json";

pub fn read_png(path: &Path) -> Result<ImageTensor> {
    let img = image::open(path).with_context(|| format!("reading image {}", path.display()))?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0.0; 3 * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            data[(c * h + y as usize) * w + x as usize] = px[c] as f64 / 255.0;
        }
    }
    Ok(ImageTensor::new(3, h, w, data)?)
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a 1- or 3-channel tensor as 8-bit RGB.
pub fn write_png(path: &Path, img: &ImageTensor) -> Result<()> {
    let (c, h, w) = img.shape();
    if c != 1 && c != 3 {
        bail!("cannot write a {c}-channel image as PNG");
    }
    let buf = image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let px = |ch: usize| to_byte(img.get(if c == 1 { 0 } else { ch }, y as usize, x as usize));
        image::Rgb([px(0), px(1), px(2)])
    });
    buf.save(path).with_context(|| format!("writing {}", path.display()))
}

/// Grayscale rendering of a map in `[0, 1]`, as 8-bit RGB.
pub fn write_map_png(path: &Path, map: &Map2D) -> Result<()> {
    let img = ImageTensor::new(1, map.height(), map.width(), map.data().to_vec())?;
    write_png(path, &img)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating directory {}", path.display()))
}

/// Description stored next to a generated dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub spec: FixtureDatasetSpec,
    pub n: usize,
}

/// Writes samples as `images/<id>.png` plus `index.json`.
pub fn write_dataset(dir: &Path, samples: &[Sample], meta: &DatasetMeta) -> Result<()> {
    let images = dir.join(IMAGES_DIR);
    create_dir(&images)?;
    let mut index = FixtureIndex::new();
    for s in samples {
        write_png(&images.join(format!("{}.png", s.id)), &s.image)?;
        index.insert(s.id.clone(), FixtureEntry { label: s.label, bbox: s.bbox });
    }
    write_json(&dir.join(INDEX_FILE), &index)?;
    write_json(&dir.join(DATASET_META), meta)
}

/// One image of a dataset directory with its annotations.
pub struct DatasetItem {
    pub id: String,
    pub image: ImageTensor,
    /// Ground-truth class when the index is in fixture format.
    pub label: Option<usize>,
    pub boxes: Vec<(String, BBox)>,
}

pub fn image_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(IMAGES_DIR).join(format!("{id}.png"))
}

/// Loads every image listed in `dir/index.json`, in id order.
pub fn load_dataset(dir: &Path) -> Result<Vec<DatasetItem>> {
    let index_path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&index_path)
        .with_context(|| format!("dataset annotations {} not found", index_path.display()))?;
    let labels: Option<FixtureIndex> = serde_json::from_str(&text).ok();
    let annotations = parse_annotations(&text).with_context(|| format!("parsing {}", index_path.display()))?;
    annotations
        .into_iter()
        .map(|(id, boxes)| {
            let image = read_png(&image_path(dir, &id))?;
            let label = labels.as_ref().and_then(|l| l.get(&id)).map(|e| e.label);
            Ok(DatasetItem { id, image, label, boxes })
        })
        .collect()
}

/// Fixture samples from a dataset directory; requires the fixture index format.
pub fn load_samples(dir: &Path) -> Result<Vec<Sample>> {
    load_dataset(dir)?
        .into_iter()
        .map(|item| match (item.label, item.boxes.first()) {
            (Some(label), Some(&(_, bbox))) => Ok(Sample { id: item.id, image: item.image, label, bbox }),
            _ => bail!("image {} has no fixture label", item.id),
        })
        .collect()
}
