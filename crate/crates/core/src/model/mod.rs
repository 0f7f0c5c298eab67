//! The boundary between saliency math and a classifier.
//!
//! Saliency and evaluation code only talks to a [`ModelAdapter`]. The crate ships one
//! implementation, [`ConvNet`], a small CNN that can be trained on the synthetic shapes in
//! [`dataset`] so that the whole pipeline runs without external weights.
//!
//! A *query* is one evaluation of the class outputs for one input image. Partial forward
//! passes that stop at a feature layer ([`ModelAdapter::feature_maps`]) never reach the class
//! outputs and are not queries.

pub mod dataset;
pub mod network;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgproc::{ImageTensor, Map2D};

pub use dataset::{generate_fixture_dataset, BBox, FixtureDatasetSpec, Sample};
pub use network::{ConvNet, NetConfig, Target};
pub use train::{train_fixture_model, TrainConfig, TrainReport};

/// K feature maps of size h×w, channel-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMaps {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMaps {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return invalid(format!(
                "feature data has {} values, expected {channels}x{height}x{width}",
                data.len()
            ));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn spatial_len(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let z = self.spatial_len();
        &self.data[k * z..(k + 1) * z]
    }

    pub fn channel_map(&self, k: usize) -> Map2D {
        Map2D::from_raw(self.height, self.width, self.channel(k).to_vec())
    }

    pub fn same_shape(&self, other: &FeatureMaps) -> bool {
        (self.channels, self.height, self.width) == (other.channels, other.height, other.width)
    }
}

/// Target-layer activations and the gradient of one class logit with respect to them.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationBundle {
    pub activations: FeatureMaps,
    pub gradients: FeatureMaps,
    pub class_index: usize,
    pub layer_id: String,
}

impl ActivationBundle {
    pub fn new(
        activations: FeatureMaps,
        gradients: FeatureMaps,
        class_index: usize,
        layer_id: impl Into<String>,
    ) -> Result<Self> {
        if !activations.same_shape(&gradients) {
            return invalid("activations and gradients differ in shape");
        }
        Ok(Self { activations, gradients, class_index, layer_id: layer_id.into() })
    }

    /// Number of spatial positions per feature map.
    pub fn z(&self) -> usize {
        self.activations.spatial_len()
    }
}

/// What the saliency code needs from a classifier.
///
/// Implementations are single-threaded; run one adapter per worker for parallel work.
pub trait ModelAdapter {
    /// Expected input shape as (channels, height, width).
    fn input_shape(&self) -> (usize, usize, usize);

    fn num_classes(&self) -> usize;

    /// Layer ids ordered from the input side to the output side.
    fn layers(&self) -> Vec<String>;

    /// The layer explanations use when none is given: the deepest convolutional layer.
    fn default_target_layer(&self) -> String;

    /// Post-softmax probabilities, one row per image. Counts one query per image.
    fn class_scores(&mut self, batch: &[ImageTensor]) -> Result<Vec<Vec<f64>>>;

    /// Activations of `layer_id` for `img` and the gradient of the pre-softmax logit of
    /// `class_index` with respect to them. Counts one query.
    fn activations_with_gradients(
        &mut self,
        img: &ImageTensor,
        class_index: usize,
        layer_id: &str,
    ) -> Result<ActivationBundle>;

    /// Activations of `layer_id` from a partial forward pass. Not a query.
    fn feature_maps(&mut self, img: &ImageTensor, layer_id: &str) -> Result<FeatureMaps>;

    /// A copy with the parameters of `layer_id` redrawn; `self` is left untouched.
    fn randomize_parameters(&self, layer_id: &str, seed: u64) -> Result<Self>
    where
        Self: Sized;

    /// Queries performed so far by this instance.
    fn query_count(&self) -> u64;

    /// Class probability for a single image.
    fn score(&mut self, img: &ImageTensor, class_index: usize) -> Result<f64> {
        let row = self.class_scores(std::slice::from_ref(img))?;
        row[0].get(class_index).copied().ok_or_else(|| {
            crate::Error::InvalidArgument(format!("class index {class_index} out of range"))
        })
    }
}

/// Wraps an adapter and counts queries independently of the adapter's own bookkeeping.
#[derive(Clone, Debug)]
pub struct Counting<A> {
    inner: A,
    queries: u64,
}

impl<A> Counting<A> {
    pub fn new(inner: A) -> Self {
        Self { inner, queries: 0 }
    }

    pub fn inner(&self) -> &A {
        &self.inner
    }

    pub fn into_inner(self) -> A {
        self.inner
    }

    pub fn reset(&mut self) {
        self.queries = 0;
    }
}

impl<A: ModelAdapter> ModelAdapter for Counting<A> {
    fn input_shape(&self) -> (usize, usize, usize) {
        self.inner.input_shape()
    }

    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn layers(&self) -> Vec<String> {
        self.inner.layers()
    }

    fn default_target_layer(&self) -> String {
        self.inner.default_target_layer()
    }

    fn class_scores(&mut self, batch: &[ImageTensor]) -> Result<Vec<Vec<f64>>> {
        let out = self.inner.class_scores(batch)?;
        self.queries += batch.len() as u64;
        Ok(out)
    }

    fn activations_with_gradients(
        &mut self,
        img: &ImageTensor,
        class_index: usize,
        layer_id: &str,
    ) -> Result<ActivationBundle> {
        let out = self.inner.activations_with_gradients(img, class_index, layer_id)?;
        self.queries += 1;
        Ok(out)
    }

    fn feature_maps(&mut self, img: &ImageTensor, layer_id: &str) -> Result<FeatureMaps> {
        self.inner.feature_maps(img, layer_id)
    }

    fn randomize_parameters(&self, layer_id: &str, seed: u64) -> Result<Self> {
        Ok(Self::new(self.inner.randomize_parameters(layer_id, seed)?))
    }

    fn query_count(&self) -> u64 {
        self.queries
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest probability; the first one wins on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax(&[1.0, -3.0, 0.5, 700.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(argmax(&p), 3);
    }

    #[test]
    fn equal_logits_give_uniform_probabilities() {
        let p = softmax(&[2.5; 4]);
        assert!(p.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn bundle_rejects_shape_mismatch() {
        let a = FeatureMaps::new(2, 2, 2, vec![0.0; 8]).unwrap();
        let g = FeatureMaps::new(2, 4, 1, vec![0.0; 8]).unwrap();
        assert!(ActivationBundle::new(a.clone(), g, 0, "x").is_err());
        let b = ActivationBundle::new(a.clone(), a, 0, "x").unwrap();
        assert_eq!(b.z(), 4);
    }
}
