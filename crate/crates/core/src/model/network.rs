//! A small CNN with hand-written forward and backward passes.
//!
//! Architecture: a stack of 3×3 convolutions (stride 1, zero padding 1, ReLU) with 2×2 max
//! pooling between them, global average pooling, optional hidden dense layers with ReLU and
//! a dense output layer producing logits.
//!
//! Layer ids are `conv1..convN` then `fc1..fcM`. The output of a convolutional layer is its
//! post-ReLU map before pooling; hidden dense layers output post-ReLU units and the last
//! dense layer outputs logits.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{softmax, ActivationBundle, FeatureMaps, ModelAdapter};
use crate::error::{invalid, Result};
use crate::imgproc::ImageTensor;

const KSIZE: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub conv_channels: Vec<usize>,
    /// Widths of the hidden dense layers between pooling and the output layer.
    pub hidden: Vec<usize>,
    pub classes: usize,
}

impl NetConfig {
    /// The 64×64 RGB two-class network used with the synthetic shapes dataset.
    pub fn fixture() -> Self {
        Self {
            input_channels: 3,
            input_height: 64,
            input_width: 64,
            conv_channels: vec![8, 16, 64],
            hidden: Vec::new(),
            classes: 2,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.conv_channels.is_empty() {
            return invalid("network needs at least one convolutional layer");
        }
        let pools = self.conv_channels.len() - 1;
        let factor = 1usize << pools;
        if self.input_height % factor != 0 || self.input_width % factor != 0 {
            return invalid(format!(
                "input {}x{} not divisible by pooling factor {factor}",
                self.input_height, self.input_width
            ));
        }
        if self.input_channels == 0 || self.hidden.contains(&0) || self.classes < 2 {
            return invalid("network dimensions must be positive with at least two classes");
        }
        Ok(())
    }

    fn conv_dims(&self, i: usize) -> (usize, usize) {
        (self.input_height >> i, self.input_width >> i)
    }
}

impl Default for NetConfig {
    fn default() -> Self {
        Self::fixture()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Layout `[out][in][ky][kx]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Layout `[out][in]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Training target for one image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Class(usize),
    /// Equal probability for every class.
    Uniform,
}

impl From<usize> for Target {
    fn from(c: usize) -> Self {
        Target::Class(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvNet {
    config: NetConfig,
    convs: Vec<Conv2d>,
    dense: Vec<Dense>,
    #[serde(skip)]
    queries: u64,
}

/// Intermediate values kept by a forward pass for the backward pass.
#[derive(Default)]
struct Trace {
    conv_in: Vec<Vec<f64>>,
    conv_out: Vec<Vec<f64>>,
    pool_idx: Vec<Vec<usize>>,
    dense_in: Vec<Vec<f64>>,
    dense_out: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

fn normal(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("standard deviation is finite and non-negative")
}

fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn conv_forward(layer: &Conv2d, x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut out = vec![0.0; layer.out_channels * hw];
    for o in 0..layer.out_channels {
        let dst = &mut out[o * hw..(o + 1) * hw];
        dst.fill(layer.bias[o]);
        for i in 0..layer.in_channels {
            let src = &x[i * hw..(i + 1) * hw];
            for ky in 0..KSIZE {
                for kx in 0..KSIZE {
                    let wv = layer.weight[((o * layer.in_channels + i) * KSIZE + ky) * KSIZE + kx];
                    let (ys, xs) = shifted_ranges(ky, kx, h, w);
                    for y in ys.clone() {
                        let sy = y + ky - 1;
                        let d = &mut dst[y * w + xs.start..y * w + xs.end];
                        let s = &src[sy * w + xs.start + kx - 1..sy * w + xs.end + kx - 1];
                        for (dv, sv) in d.iter_mut().zip(s) {
                            *dv += wv * sv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Output rows/cols for which tap (ky, kx) reads inside the image.
fn shifted_ranges(
    ky: usize,
    kx: usize,
    h: usize,
    w: usize,
) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let rows = (1usize.saturating_sub(ky))..(h + 1 - ky).min(h);
    let cols = (1usize.saturating_sub(kx))..(w + 1 - kx).min(w);
    (rows, cols)
}

/// Gradient of a convolution with respect to its input, and optionally its parameters.
fn conv_backward(
    layer: &Conv2d,
    x: &[f64],
    d_pre: &[f64],
    h: usize,
    w: usize,
    grads: Option<&mut Conv2d>,
    need_input: bool,
) -> Vec<f64> {
    let hw = h * w;
    if let Some(g) = grads {
        for o in 0..layer.out_channels {
            let dp = &d_pre[o * hw..(o + 1) * hw];
            g.bias[o] += dp.iter().sum::<f64>();
            for i in 0..layer.in_channels {
                let src = &x[i * hw..(i + 1) * hw];
                for ky in 0..KSIZE {
                    for kx in 0..KSIZE {
                        let (ys, xs) = shifted_ranges(ky, kx, h, w);
                        let mut acc = 0.0;
                        for y in ys.clone() {
                            let sy = y + ky - 1;
                            let d = &dp[y * w + xs.start..y * w + xs.end];
                            let s = &src[sy * w + xs.start + kx - 1..sy * w + xs.end + kx - 1];
                            acc += d.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
                        }
                        g.weight[((o * layer.in_channels + i) * KSIZE + ky) * KSIZE + kx] += acc;
                    }
                }
            }
        }
    }
    if !need_input {
        return Vec::new();
    }
    let mut dx = vec![0.0; layer.in_channels * hw];
    for o in 0..layer.out_channels {
        let dp = &d_pre[o * hw..(o + 1) * hw];
        for i in 0..layer.in_channels {
            let dst = &mut dx[i * hw..(i + 1) * hw];
            for ky in 0..KSIZE {
                for kx in 0..KSIZE {
                    let wv = layer.weight[((o * layer.in_channels + i) * KSIZE + ky) * KSIZE + kx];
                    let (ys, xs) = shifted_ranges(ky, kx, h, w);
                    for y in ys.clone() {
                        let sy = y + ky - 1;
                        let d = &mut dst[sy * w + xs.start + kx - 1..sy * w + xs.end + kx - 1];
                        let s = &dp[y * w + xs.start..y * w + xs.end];
                        for (dv, sv) in d.iter_mut().zip(s) {
                            *dv += wv * sv;
                        }
                    }
                }
            }
        }
    }
    dx
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

/// 2×2 max pooling with stride 2; returns the pooled map and, per pooled cell, the index of
/// the winning input cell (first maximum in scan order).
fn max_pool(x: &[f64], channels: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (ph, pw) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(channels * ph * pw);
    let mut idx = Vec::with_capacity(channels * ph * pw);
    for c in 0..channels {
        let base = c * h * w;
        for py in 0..ph {
            for px in 0..pw {
                let mut best = base + 2 * py * w + 2 * px;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let j = base + (2 * py + dy) * w + 2 * px + dx;
                    if x[j] > x[best] {
                        best = j;
                    }
                }
                out.push(x[best]);
                idx.push(best);
            }
        }
    }
    (out, idx)
}

fn global_average(x: &[f64], channels: usize, z: usize) -> Vec<f64> {
    (0..channels).map(|c| x[c * z..(c + 1) * z].iter().sum::<f64>() / z as f64).collect()
}

fn dense_forward(layer: &Dense, x: &[f64]) -> Vec<f64> {
    (0..layer.outputs)
        .map(|o| {
            let row = &layer.weight[o * layer.inputs..(o + 1) * layer.inputs];
            layer.bias[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

fn dense_backward(layer: &Dense, x: &[f64], d_pre: &[f64], grads: Option<&mut Dense>) -> Vec<f64> {
    if let Some(g) = grads {
        for o in 0..layer.outputs {
            g.bias[o] += d_pre[o];
            let row = &mut g.weight[o * layer.inputs..(o + 1) * layer.inputs];
            for (gw, xv) in row.iter_mut().zip(x) {
                *gw += d_pre[o] * xv;
            }
        }
    }
    let mut dx = vec![0.0; layer.inputs];
    for o in 0..layer.outputs {
        let row = &layer.weight[o * layer.inputs..(o + 1) * layer.inputs];
        for (d, wv) in dx.iter_mut().zip(row) {
            *d += d_pre[o] * wv;
        }
    }
    dx
}

impl ConvNet {
    /// He-initialised network; deterministic in `seed`.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut convs = Vec::with_capacity(config.conv_channels.len());
        let mut in_c = config.input_channels;
        for &out_c in &config.conv_channels {
            let fan_in = in_c * KSIZE * KSIZE;
            let dist = normal((2.0 / fan_in as f64).sqrt());
            let weight = (0..out_c * fan_in).map(|_| dist.sample(&mut rng)).collect();
            convs.push(Conv2d { in_channels: in_c, out_channels: out_c, weight, bias: vec![0.0; out_c] });
            in_c = out_c;
        }
        let mut widths = vec![in_c];
        widths.extend(&config.hidden);
        widths.push(config.classes);
        let mut dense = Vec::with_capacity(widths.len() - 1);
        for (j, pair) in widths.windows(2).enumerate() {
            let (inputs, outputs) = (pair[0], pair[1]);
            let gain = if j < config.hidden.len() { 2.0 } else { 1.0 };
            let dist = normal((gain / inputs as f64).sqrt());
            let weight = (0..inputs * outputs).map(|_| dist.sample(&mut rng)).collect();
            dense.push(Dense { inputs, outputs, weight, bias: vec![0.0; outputs] });
        }
        Ok(Self { config, convs, dense, queries: 0 })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    /// Same architecture with every parameter set to zero; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.queries = 0;
        for p in z.params_mut() {
            p.fill(0.0);
        }
        z
    }

    /// All parameter tensors in a fixed order (weights then bias, layer by layer).
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for c in &self.convs {
            out.push(&c.weight);
            out.push(&c.bias);
        }
        for d in &self.dense {
            out.push(&d.weight);
            out.push(&d.bias);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for c in &mut self.convs {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        for d in &mut self.dense {
            out.push(&mut d.weight);
            out.push(&mut d.bias);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Weight and bias of one layer.
    pub fn layer_params(&self, layer_id: &str) -> Result<(&[f64], &[f64])> {
        let idx = self.layer_index(layer_id)?;
        let n = self.convs.len();
        Ok(if idx < n {
            (&self.convs[idx].weight, &self.convs[idx].bias)
        } else {
            (&self.dense[idx - n].weight, &self.dense[idx - n].bias)
        })
    }

    fn layer_params_mut(&mut self, idx: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
        let n = self.convs.len();
        if idx < n {
            let c = &mut self.convs[idx];
            (&mut c.weight, &mut c.bias)
        } else {
            let d = &mut self.dense[idx - n];
            (&mut d.weight, &mut d.bias)
        }
    }

    pub fn layer_index(&self, layer_id: &str) -> Result<usize> {
        self.layers()
            .iter()
            .position(|l| l == layer_id)
            .map_or_else(|| invalid(format!("unknown layer '{layer_id}'")), Ok)
    }

    fn check_input(&self, img: &ImageTensor) -> Result<()> {
        let want = (self.config.input_channels, self.config.input_height, self.config.input_width);
        if img.shape() != want {
            return invalid(format!("image shape {:?} does not match model input {:?}", img.shape(), want));
        }
        Ok(())
    }

    /// Shape (K, h, w) of a layer's output.
    pub fn layer_shape(&self, layer: usize) -> (usize, usize, usize) {
        let n = self.convs.len();
        if layer < n {
            let (h, w) = self.config.conv_dims(layer);
            (self.config.conv_channels[layer], h, w)
        } else {
            (self.config.hidden.get(layer - n).copied().unwrap_or(self.config.classes), 1, 1)
        }
    }

    /// Forward pass that stops once the output of layer `upto` is available.
    fn forward(&self, input: &[f64], upto: usize) -> Trace {
        let n = self.convs.len();
        let mut t = Trace::default();
        let mut x = input.to_vec();
        for (i, conv) in self.convs.iter().enumerate() {
            let (h, w) = self.config.conv_dims(i);
            let mut out = conv_forward(conv, &x, h, w);
            relu_in_place(&mut out);
            t.conv_in.push(std::mem::take(&mut x));
            if i + 1 < n {
                let (pooled, idx) = max_pool(&out, conv.out_channels, h, w);
                t.pool_idx.push(idx);
                x = pooled;
            } else {
                x = global_average(&out, conv.out_channels, h * w);
            }
            t.conv_out.push(out);
            if upto == i {
                return t;
            }
        }
        let last = self.dense.len() - 1;
        for (j, layer) in self.dense.iter().enumerate() {
            let mut y = dense_forward(layer, &x);
            if j < last {
                relu_in_place(&mut y);
            }
            t.dense_in.push(std::mem::replace(&mut x, y.clone()));
            t.dense_out.push(y);
            if upto == n + j {
                return t;
            }
        }
        t.logits = x;
        t
    }

    /// Runs dense layers `from..` on `x`.
    fn dense_head(&self, from: usize, mut x: Vec<f64>) -> Vec<f64> {
        let last = self.dense.len() - 1;
        for (j, layer) in self.dense.iter().enumerate().skip(from) {
            x = dense_forward(layer, &x);
            if j < last {
                relu_in_place(&mut x);
            }
        }
        x
    }

    fn layer_output(&self, t: &Trace, layer: usize) -> Vec<f64> {
        let n = self.convs.len();
        if layer < n {
            t.conv_out[layer].clone()
        } else {
            t.dense_out[layer - n].clone()
        }
    }

    /// Logits computed from a given output of layer `layer_id`, running only the layers above it.
    pub fn logits_from_layer(&self, layer_id: &str, output: &[f64]) -> Result<Vec<f64>> {
        let layer = self.layer_index(layer_id)?;
        let (k, h, w) = self.layer_shape(layer);
        if output.len() != k * h * w {
            return invalid(format!("layer output has {} values, expected {}", output.len(), k * h * w));
        }
        let n = self.convs.len();
        if layer >= n {
            return Ok(self.dense_head(layer - n + 1, output.to_vec()));
        }
        let mut x = output.to_vec();
        let mut i = layer;
        while i + 1 < n {
            let (h, w) = self.config.conv_dims(i);
            let (pooled, _) = max_pool(&x, self.convs[i].out_channels, h, w);
            i += 1;
            let (h, w) = self.config.conv_dims(i);
            x = conv_forward(&self.convs[i], &pooled, h, w);
            relu_in_place(&mut x);
        }
        let (h, w) = self.config.conv_dims(n - 1);
        let gap = global_average(&x, self.convs[n - 1].out_channels, h * w);
        Ok(self.dense_head(0, gap))
    }

    /// Back-propagates `d_logits`. Returns the gradient with respect to the output of layer
    /// `capture`. When `grads` is given, parameter gradients of every layer are accumulated
    /// into it and the pass runs down to the first layer.
    fn backward(
        &self,
        t: &Trace,
        d_logits: &[f64],
        capture: usize,
        mut grads: Option<&mut ConvNet>,
    ) -> Vec<f64> {
        let n = self.convs.len();
        let training = grads.is_some();
        let mut captured = Vec::new();
        let mut d = d_logits.to_vec();

        let last = self.dense.len() - 1;
        for j in (0..=last).rev() {
            if capture == n + j {
                if !training {
                    return d;
                }
                captured = d.clone();
            }
            if j < last {
                for (dv, &ov) in d.iter_mut().zip(&t.dense_out[j]) {
                    if ov <= 0.0 {
                        *dv = 0.0;
                    }
                }
            }
            d = dense_backward(&self.dense[j], &t.dense_in[j], &d, grads.as_deref_mut().map(|g| &mut g.dense[j]));
        }
        let d_gap = d;

        let (h, w) = self.config.conv_dims(n - 1);
        let z = h * w;
        d = d_gap.iter().flat_map(|&g| std::iter::repeat(g / z as f64).take(z)).collect();

        for i in (0..n).rev() {
            if capture == i {
                if !training {
                    return d;
                }
                captured = d.clone();
            }
            for (dv, &ov) in d.iter_mut().zip(&t.conv_out[i]) {
                if ov <= 0.0 {
                    *dv = 0.0;
                }
            }
            let (h, w) = self.config.conv_dims(i);
            let dx = conv_backward(
                &self.convs[i],
                &t.conv_in[i],
                &d,
                h,
                w,
                grads.as_deref_mut().map(|g| &mut g.convs[i]),
                i > 0,
            );
            if i == 0 {
                break;
            }
            let prev = &t.conv_out[i - 1];
            let mut d_prev = vec![0.0; prev.len()];
            for (&src, &g) in t.pool_idx[i - 1].iter().zip(&dx) {
                d_prev[src] += g;
            }
            d = d_prev;
        }
        captured
    }

    /// Logits for one image; does not count as a query.
    pub fn logits(&self, img: &ImageTensor) -> Result<Vec<f64>> {
        self.check_input(img)?;
        Ok(self.forward(img.data(), usize::MAX).logits)
    }

    /// Predicted class for one image; does not count as a query.
    pub fn predict(&self, img: &ImageTensor) -> Result<usize> {
        Ok(super::argmax(&self.logits(img)?))
    }

    /// Softmax cross-entropy loss for one labelled image, accumulating parameter gradients.
    /// Adds the cross-entropy gradient for one image to `grads` and returns the loss.
    pub fn accumulate_gradients(&self, img: &ImageTensor, target: Target, grads: &mut ConvNet) -> Result<f64> {
        self.check_input(img)?;
        let k = self.config.classes;
        let q = match target {
            Target::Class(c) if c >= k => return invalid(format!("label {c} out of range")),
            Target::Class(c) => (0..k).map(|i| f64::from(u8::from(i == c))).collect::<Vec<_>>(),
            Target::Uniform => vec![1.0 / k as f64; k],
        };
        let t = self.forward(img.data(), usize::MAX);
        let p = softmax(&t.logits);
        let d_logits: Vec<f64> = p.iter().zip(&q).map(|(p, q)| p - q).collect();
        self.backward(&t, &d_logits, 0, Some(grads));
        Ok(-p.iter().zip(&q).map(|(p, q)| q * p.max(f64::MIN_POSITIVE).ln()).sum::<f64>())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: ConvNet = serde_json::from_str(s)?;
        net.config.validate()?;
        let expected = ConvNet::new(net.config.clone(), 0)?;
        let shapes_match = expected.params().iter().zip(net.params()).all(|(a, b)| a.len() == b.len())
            && expected.params().len() == net.params().len();
        if !shapes_match {
            return invalid("checkpoint parameter shapes do not match its configuration");
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl ModelAdapter for ConvNet {
    fn input_shape(&self) -> (usize, usize, usize) {
        (self.config.input_channels, self.config.input_height, self.config.input_width)
    }

    fn num_classes(&self) -> usize {
        self.config.classes
    }

    fn layers(&self) -> Vec<String> {
        (1..=self.convs.len())
            .map(|i| format!("conv{i}"))
            .chain((1..=self.dense.len()).map(|j| format!("fc{j}")))
            .collect()
    }

    fn default_target_layer(&self) -> String {
        format!("conv{}", self.convs.len())
    }

    fn class_scores(&mut self, batch: &[ImageTensor]) -> Result<Vec<Vec<f64>>> {
        for img in batch {
            self.check_input(img)?;
        }
        let rows = batch.iter().map(|img| softmax(&self.forward(img.data(), usize::MAX).logits)).collect();
        self.queries += batch.len() as u64;
        Ok(rows)
    }

    fn activations_with_gradients(
        &mut self,
        img: &ImageTensor,
        class_index: usize,
        layer_id: &str,
    ) -> Result<ActivationBundle> {
        self.check_input(img)?;
        let layer = self.layer_index(layer_id)?;
        if class_index >= self.config.classes {
            return invalid(format!("class index {class_index} out of range"));
        }
        let t = self.forward(img.data(), usize::MAX);
        let mut d_logits = vec![0.0; self.config.classes];
        d_logits[class_index] = 1.0;
        let grad = self.backward(&t, &d_logits, layer, None);
        let (k, h, w) = self.layer_shape(layer);
        self.queries += 1;
        ActivationBundle::new(
            FeatureMaps::new(k, h, w, self.layer_output(&t, layer))?,
            FeatureMaps::new(k, h, w, grad)?,
            class_index,
            layer_id,
        )
    }

    fn feature_maps(&mut self, img: &ImageTensor, layer_id: &str) -> Result<FeatureMaps> {
        self.check_input(img)?;
        let layer = self.layer_index(layer_id)?;
        let t = self.forward(img.data(), layer);
        let (k, h, w) = self.layer_shape(layer);
        FeatureMaps::new(k, h, w, self.layer_output(&t, layer))
    }

    /// Redraws the layer's weights and biases i.i.d. from zero-mean normals whose standard
    /// deviations match the current weights and biases respectively.
    fn randomize_parameters(&self, layer_id: &str, seed: u64) -> Result<Self> {
        let idx = self.layer_index(layer_id)?;
        let mut copy = self.clone();
        copy.queries = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (weight, bias) = copy.layer_params_mut(idx);
        for tensor in [weight, bias] {
            let dist = normal(population_std(tensor));
            for v in tensor.iter_mut() {
                *v = dist.sample(&mut rng);
            }
        }
        Ok(copy)
    }

    fn query_count(&self) -> u64 {
        self.queries
    }
}
