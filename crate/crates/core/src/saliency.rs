//! Group-CAM, the Grad-CAM baseline and the gradient-free mask used for fine-tuning.
//!
//! Group-CAM splits the target-layer feature maps into `G` contiguous channel groups,
//! turns each group into a gradient-weighted initial mask, scores every mask by how much of
//! the class probability it restores on a blurred copy of the input, and sums the masks
//! weighted by those confidence gains.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgproc::{bilinear_upsample, blend, denoise, gaussian_blur2d, minmax_normalize, relu, ImageTensor, Map2D};
use crate::model::{ActivationBundle, FeatureMaps, ModelAdapter};

pub const DEFAULT_GROUPS: usize = 32;
pub const DEFAULT_THETA: f64 = 70.0;
pub const DEFAULT_KSIZE: usize = 51;
pub const DEFAULT_SIGMA: f64 = 50.0;
pub const FINETUNE_GROUPS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupCamConfig {
    pub groups: usize,
    /// Percentile used by the de-noising step.
    pub theta: f64,
    /// When false the de-noising step is skipped entirely.
    pub denoise: bool,
    pub ksize: usize,
    pub sigma: f64,
    /// Target layer; `None` selects the adapter's default.
    pub layer_id: Option<String>,
}

impl Default for GroupCamConfig {
    fn default() -> Self {
        Self {
            groups: DEFAULT_GROUPS,
            theta: DEFAULT_THETA,
            denoise: true,
            ksize: DEFAULT_KSIZE,
            sigma: DEFAULT_SIGMA,
            layer_id: None,
        }
    }
}

impl GroupCamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 {
            return invalid("number of groups must be at least 1");
        }
        if !(0.0..=100.0).contains(&self.theta) {
            return invalid(format!("theta {} outside [0, 100]", self.theta));
        }
        if self.ksize % 2 == 0 {
            return invalid(format!("blur kernel size must be odd, got {}", self.ksize));
        }
        if !(self.sigma > 0.0) {
            return invalid(format!("blur sigma must be positive, got {}", self.sigma));
        }
        Ok(())
    }

    fn layer(&self, adapter: &impl ModelAdapter) -> String {
        self.layer_id.clone().unwrap_or_else(|| adapter.default_target_layer())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    GroupCam,
    GradCam,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::GroupCam => "groupcam",
            Method::GradCam => "gradcam",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "groupcam" => Ok(Method::GroupCam),
            "gradcam" => Ok(Method::GradCam),
            other => invalid(format!("unknown method '{other}'")),
        }
    }
}

/// An H×W map in `[0, 1]` aligned with the explained image.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    pub map: Map2D,
    pub class_index: usize,
    pub method: Method,
}

impl std::ops::Deref for SaliencyMap {
    type Target = Map2D;

    fn deref(&self) -> &Map2D {
        &self.map
    }
}

/// Confidence gain of one group and its processed, full-resolution mask.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupScore {
    pub group: usize,
    pub alpha: f64,
    pub mask: Map2D,
}

/// Spatial mean of the gradients of each channel.
pub fn importance_weights(bundle: &ActivationBundle) -> Vec<f64> {
    let z = bundle.z() as f64;
    (0..bundle.gradients.channels).map(|k| bundle.gradients.channel(k).iter().sum::<f64>() / z).collect()
}

/// Contiguous channel blocks of size `K / G`; the remainder joins the last block.
pub fn group_ranges(channels: usize, groups: usize) -> Result<Vec<Range<usize>>> {
    if groups == 0 || groups > channels {
        return invalid(format!("cannot split {channels} channels into {groups} groups"));
    }
    let size = channels / groups;
    Ok((0..groups)
        .map(|g| {
            let end = if g + 1 == groups { channels } else { (g + 1) * size };
            g * size..end
        })
        .collect())
}

/// `ReLU(Σ_{k in group} w_k·A^k)` for every group.
pub fn grouped_masks(activations: &FeatureMaps, weights: &[f64], groups: usize) -> Result<Vec<Map2D>> {
    if weights.len() != activations.channels {
        return invalid(format!("{} weights for {} channels", weights.len(), activations.channels));
    }
    let z = activations.spatial_len();
    group_ranges(activations.channels, groups)?
        .into_iter()
        .map(|range| {
            let mut acc = vec![0.0; z];
            for k in range {
                let w = weights[k];
                for (a, &v) in acc.iter_mut().zip(activations.channel(k)) {
                    *a += w * v;
                }
            }
            Ok(relu(&Map2D::from_raw(activations.height, activations.width, acc)))
        })
        .collect()
}

/// De-noise (when `theta` is given), min-max normalize, then upsample to `height`×`width`.
pub fn process_mask(mask: &Map2D, theta: Option<f64>, height: usize, width: usize) -> Result<Map2D> {
    let cleaned = match theta {
        Some(t) => denoise(mask, t)?,
        None => mask.clone(),
    };
    bilinear_upsample(&minmax_normalize(&cleaned), height, width)
}

/// Class probability of the masked blend minus that of the baseline. Performs two queries.
pub fn confidence_gain(
    adapter: &mut impl ModelAdapter,
    original: &ImageTensor,
    baseline: &ImageTensor,
    mask: &Map2D,
    class_index: usize,
) -> Result<f64> {
    let blended = blend(original, baseline, mask)?;
    let scores = adapter.class_scores(&[blended, baseline.clone()])?;
    let pick = |row: &[f64]| {
        row.get(class_index)
            .copied()
            .ok_or_else(|| crate::Error::InvalidArgument(format!("class index {class_index} out of range")))
    };
    Ok(pick(&scores[0])? - pick(&scores[1])?)
}

/// Scores the baseline once and every mask once: `masks.len() + 1` queries.
fn score_masks(
    adapter: &mut impl ModelAdapter,
    original: &ImageTensor,
    baseline: &ImageTensor,
    masks: &[Map2D],
    class_index: usize,
) -> Result<Vec<f64>> {
    let base = adapter.score(baseline, class_index)?;
    let blended = masks.iter().map(|m| blend(original, baseline, m)).collect::<Result<Vec<_>>>()?;
    let scores = adapter.class_scores(&blended)?;
    Ok(scores.iter().map(|row| row[class_index] - base).collect())
}

/// `ReLU(Σ α_ℓ·M'_ℓ)`, before any output normalization.
pub fn combine_masks(scores: &[GroupScore]) -> Result<Map2D> {
    let first = scores.first().map_or_else(|| invalid("no masks to combine"), Ok)?;
    let mut acc = vec![0.0; first.mask.len()];
    for s in scores {
        for (a, &m) in acc.iter_mut().zip(s.mask.data()) {
            *a += s.alpha * m;
        }
    }
    Ok(relu(&Map2D::from_raw(first.mask.height(), first.mask.width(), acc)))
}

fn check_class(adapter: &impl ModelAdapter, class_index: usize) -> Result<()> {
    if class_index >= adapter.num_classes() {
        return invalid(format!("class index {class_index} out of range for {} classes", adapter.num_classes()));
    }
    Ok(())
}

/// Group-CAM saliency for `class_index`, plus the per-group confidence gains and masks.
///
/// Performs exactly `G + 2` queries: one gradient pass, one baseline pass and one pass per
/// masked image. The returned map is min-max normalized.
pub fn group_cam(
    adapter: &mut impl ModelAdapter,
    img: &ImageTensor,
    class_index: usize,
    config: &GroupCamConfig,
) -> Result<(SaliencyMap, Vec<GroupScore>)> {
    config.validate()?;
    check_class(adapter, class_index)?;
    let layer = config.layer(adapter);
    let bundle = adapter.activations_with_gradients(img, class_index, &layer)?;
    let weights = importance_weights(&bundle);
    let initial = grouped_masks(&bundle.activations, &weights, config.groups)?;
    let theta = config.denoise.then_some(config.theta);
    let masks = initial
        .iter()
        .map(|m| process_mask(m, theta, img.height(), img.width()))
        .collect::<Result<Vec<_>>>()?;

    let baseline = gaussian_blur2d(img, config.ksize, config.sigma)?;
    let alphas = score_masks(adapter, img, &baseline, &masks, class_index)?;
    let scores: Vec<GroupScore> = alphas
        .into_iter()
        .zip(masks)
        .enumerate()
        .map(|(group, (alpha, mask))| GroupScore { group, alpha, mask })
        .collect();
    let map = minmax_normalize(&combine_masks(&scores)?);
    Ok((SaliencyMap { map, class_index, method: Method::GroupCam }, scores))
}

/// Grad-CAM: `ReLU(Σ w_k·A^k)` upsampled and min-max normalized. One query.
pub fn grad_cam(
    adapter: &mut impl ModelAdapter,
    img: &ImageTensor,
    class_index: usize,
    layer_id: Option<&str>,
) -> Result<SaliencyMap> {
    check_class(adapter, class_index)?;
    let layer = layer_id.map_or_else(|| adapter.default_target_layer(), str::to_string);
    let bundle = adapter.activations_with_gradients(img, class_index, &layer)?;
    let weights = importance_weights(&bundle);
    let cam = grouped_masks(&bundle.activations, &weights, 1)?.remove(0);
    let map = minmax_normalize(&bilinear_upsample(&cam, img.height(), img.width())?);
    Ok(SaliencyMap { map, class_index, method: Method::GradCam })
}

/// Binary mask for saliency-guided fine-tuning.
///
/// Group masks are plain channel sums (no gradient weights, no de-noising), so no backward
/// pass is needed: `groups + 1` queries. The combined map is binarized at its mean.
pub fn finetune_mask(
    adapter: &mut impl ModelAdapter,
    img: &ImageTensor,
    class_index: usize,
    groups: usize,
    ksize: usize,
    sigma: f64,
) -> Result<Map2D> {
    check_class(adapter, class_index)?;
    let layer = adapter.default_target_layer();
    let features = adapter.feature_maps(img, &layer)?;
    let ones = vec![1.0; features.channels];
    let masks = grouped_masks(&features, &ones, groups)?
        .iter()
        .map(|m| process_mask(m, None, img.height(), img.width()))
        .collect::<Result<Vec<_>>>()?;
    let baseline = gaussian_blur2d(img, ksize, sigma)?;
    let alphas = score_masks(adapter, img, &baseline, &masks, class_index)?;
    let scores: Vec<GroupScore> = alphas
        .into_iter()
        .zip(masks)
        .enumerate()
        .map(|(group, (alpha, mask))| GroupScore { group, alpha, mask })
        .collect();
    Ok(binarize_at_mean(&minmax_normalize(&combine_masks(&scores)?)))
}

/// 1 where the value is strictly above the mean, 0 elsewhere.
pub fn binarize_at_mean(m: &Map2D) -> Map2D {
    let mean = m.mean();
    m.map(|v| if v > mean { 1.0 } else { 0.0 })
}
