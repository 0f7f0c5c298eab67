//! Saliency evaluation: deletion/insertion curves, the pointing game and parameter
//! randomization checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgproc::{gaussian_blur2d, ImageTensor, Map2D};
use crate::model::{BBox, ModelAdapter};
use crate::saliency::{group_cam, GroupCamConfig, DEFAULT_KSIZE, DEFAULT_SIGMA};

/// 8 rows of a 224-pixel-wide image per step, i.e. 1/28 of the pixels.
pub const DEFAULT_STEP_FRACTION: f64 = (224.0 * 8.0) / (224.0 * 224.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveConfig {
    pub step_fraction: f64,
    pub ksize: usize,
    pub sigma: f64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { step_fraction: DEFAULT_STEP_FRACTION, ksize: DEFAULT_KSIZE, sigma: DEFAULT_SIGMA }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    pub fractions: Vec<f64>,
    pub scores: Vec<f64>,
    pub auc: f64,
}

/// Number of steps needed to cover every pixel, `ceil(1 / step_fraction)`.
///
/// Reciprocals within 1e-9 of an integer are snapped to it, so `1/28` gives 28 steps.
pub fn curve_steps(step_fraction: f64) -> Result<usize> {
    if !(step_fraction > 0.0 && step_fraction <= 1.0) {
        return invalid(format!("step fraction {step_fraction} outside (0, 1]"));
    }
    let inv = 1.0 / step_fraction;
    let nearest = inv.round();
    Ok(if (inv - nearest).abs() <= 1e-9 * nearest { nearest as usize } else { inv.ceil() as usize })
}

/// Cumulative number of pixels changed after each step; the last entry is `n_pixels`.
pub fn step_counts(step_fraction: f64, n_pixels: usize) -> Result<Vec<usize>> {
    let steps = curve_steps(step_fraction)?;
    Ok((1..=steps)
        .map(|i| {
            if i == steps {
                n_pixels
            } else {
                let exact = i as f64 * step_fraction * n_pixels as f64;
                ((exact - 1e-9).ceil() as usize).min(n_pixels)
            }
        })
        .collect())
}

/// Pixel indices by descending saliency; equal values keep ascending row-major order.
pub fn pixel_order(saliency: &Map2D) -> Vec<usize> {
    let data = saliency.data();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[b].total_cmp(&data[a]));
    order
}

/// Trapezoidal area under `scores` over `fractions`.
pub fn trapezoid_auc(fractions: &[f64], scores: &[f64]) -> f64 {
    fractions
        .windows(2)
        .zip(scores.windows(2))
        .map(|(f, s)| (f[1] - f[0]) * (s[0] + s[1]) / 2.0)
        .sum()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Deletion,
    Insertion,
}

fn run_curve(
    adapter: &mut impl ModelAdapter,
    img: &ImageTensor,
    saliency: &Map2D,
    class_index: usize,
    config: &CurveConfig,
    direction: Direction,
) -> Result<CurveResult> {
    if saliency.height() != img.height() || saliency.width() != img.width() {
        return invalid(format!(
            "saliency is {}x{} but image is {}x{}",
            saliency.height(),
            saliency.width(),
            img.height(),
            img.width()
        ));
    }
    let n = saliency.len();
    let counts = step_counts(config.step_fraction, n)?;
    let blurred = gaussian_blur2d(img, config.ksize, config.sigma)?;
    let (mut canvas, source) = match direction {
        Direction::Deletion => (img.clone(), &blurred),
        Direction::Insertion => (blurred.clone(), img),
    };
    let order = pixel_order(saliency);

    let mut fractions = Vec::with_capacity(counts.len() + 1);
    let mut scores = Vec::with_capacity(counts.len() + 1);
    fractions.push(0.0);
    scores.push(adapter.score(&canvas, class_index)?);
    let mut done = 0;
    for &count in &counts {
        for &idx in &order[done..count] {
            canvas.copy_pixel_from(source, idx);
        }
        done = count;
        fractions.push(count as f64 / n as f64);
        scores.push(adapter.score(&canvas, class_index)?);
    }
    let auc = trapezoid_auc(&fractions, &scores);
    Ok(CurveResult { fractions, scores, auc })
}

/// Replaces the most salient pixels of the image with blurred pixels, step by step.
/// Performs `ceil(1/step_fraction) + 1` queries.
pub fn deletion_curve(
    adapter: &mut impl ModelAdapter,
    img: &ImageTensor,
    saliency: &Map2D,
    class_index: usize,
    config: &CurveConfig,
) -> Result<CurveResult> {
    run_curve(adapter, img, saliency, class_index, config, Direction::Deletion)
}

/// Restores the most salient original pixels into the blurred image, step by step.
/// Performs `ceil(1/step_fraction) + 1` queries.
pub fn insertion_curve(
    adapter: &mut impl ModelAdapter,
    img: &ImageTensor,
    saliency: &Map2D,
    class_index: usize,
    config: &CurveConfig,
) -> Result<CurveResult> {
    run_curve(adapter, img, saliency, class_index, config, Direction::Insertion)
}

/// Insertion AUC minus deletion AUC.
pub fn overall_score(insertion_auc: f64, deletion_auc: f64) -> f64 {
    insertion_auc - deletion_auc
}

/// Hit (true) or miss for every category present in `boxes`: whether the most salient pixel
/// (first in row-major order on ties) lies in the union of that category's boxes, edges
/// included.
pub fn pointing_game(saliency: &Map2D, boxes: &[(String, BBox)]) -> Result<Vec<(String, bool)>> {
    if boxes.is_empty() {
        return invalid("pointing game needs at least one bounding box");
    }
    if let Some((_, b)) = boxes.iter().find(|(_, b)| !b.within(saliency.height(), saliency.width())) {
        return invalid(format!("bounding box {b:?} outside the {}x{} map", saliency.height(), saliency.width()));
    }
    let peak = saliency.argmax();
    let (row, col) = (peak / saliency.width(), peak % saliency.width());
    let mut per_category: BTreeMap<&str, bool> = BTreeMap::new();
    for (category, b) in boxes {
        *per_category.entry(category).or_insert(false) |= b.contains(row, col);
    }
    Ok(per_category.into_iter().map(|(c, hit)| (c.to_string(), hit)).collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitMiss {
    pub hits: usize,
    pub misses: usize,
}

impl HitMiss {
    pub fn accuracy(&self) -> f64 {
        self.hits as f64 / (self.hits + self.misses) as f64
    }
}

/// Pointing-game tallies per category.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointingResult {
    pub categories: BTreeMap<String, HitMiss>,
}

impl PointingResult {
    pub fn record(&mut self, category: &str, hit: bool) {
        let entry = self.categories.entry(category.to_string()).or_default();
        if hit {
            entry.hits += 1;
        } else {
            entry.misses += 1;
        }
    }

    pub fn record_all(&mut self, outcomes: &[(String, bool)]) {
        for (c, hit) in outcomes {
            self.record(c, *hit);
        }
    }

    /// Mean of per-category accuracies over categories with at least one sample.
    pub fn mean_accuracy(&self) -> f64 {
        let accs: Vec<f64> =
            self.categories.values().filter(|hm| hm.hits + hm.misses > 0).map(HitMiss::accuracy).collect();
        if accs.is_empty() {
            return 0.0;
        }
        accs.iter().sum::<f64>() / accs.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomizationMode {
    Cascade,
    Independent,
}

impl std::str::FromStr for RandomizationMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cascade" => Ok(Self::Cascade),
            "independent" => Ok(Self::Independent),
            other => invalid(format!("unknown randomization mode '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSimilarity {
    pub layer_id: String,
    pub similarity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SanityReport {
    pub mode: RandomizationMode,
    /// First entry is the un-randomized model (`layer_id` = [`ORIGINAL_LAYER`]); the rest
    /// follow the randomization order, deepest layer first.
    pub layers: Vec<LayerSimilarity>,
}

pub const ORIGINAL_LAYER: &str = "original";

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
///
/// Identical inputs give exactly 1. If only one side is constant there is no ranking to
/// compare and the result is 0.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman inputs differ in length");
    if a == b {
        return 1.0;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    (cov / (va * vb).sqrt()).clamp(-1.0, 1.0)
}

/// Seed for the `i`-th randomized layer.
pub fn layer_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Compares Group-CAM on the trained model with Group-CAM on randomized copies.
///
/// Cascade mode randomizes layers cumulatively from the deepest to the shallowest;
/// independent mode randomizes one layer at a time starting from the trained model.
pub fn sanity_check<A: ModelAdapter>(
    adapter: &mut A,
    img: &ImageTensor,
    class_index: usize,
    config: &GroupCamConfig,
    mode: RandomizationMode,
    seed: u64,
) -> Result<SanityReport> {
    let (reference, _) = group_cam(adapter, img, class_index, config)?;
    let mut layers = vec![LayerSimilarity {
        layer_id: ORIGINAL_LAYER.to_string(),
        similarity: spearman(reference.data(), reference.data()),
    }];
    let order: Vec<String> = adapter.layers().into_iter().rev().collect();
    let mut cascade: Option<A> = None;
    for (i, layer) in order.iter().enumerate() {
        let s = layer_seed(seed, i);
        let mut randomized = match (mode, cascade.take()) {
            (RandomizationMode::Cascade, Some(prev)) => prev.randomize_parameters(layer, s)?,
            _ => adapter.randomize_parameters(layer, s)?,
        };
        let (perturbed, _) = group_cam(&mut randomized, img, class_index, config)?;
        layers.push(LayerSimilarity {
            layer_id: layer.clone(),
            similarity: spearman(reference.data(), perturbed.data()),
        });
        if mode == RandomizationMode::Cascade {
            cascade = Some(randomized);
        }
    }
    Ok(SanityReport { mode, layers })
}
