//! Array primitives shared by the saliency and evaluation code.
//!
//! Every function here is a pure function of its arguments; identical inputs give
//! bit-identical outputs.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A channel-major (C×H×W) image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    /// Builds an image from channel-major data, rejecting empty shapes and values outside `[0, 1]`.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return invalid(format!("image shape {channels}x{height}x{width} has a zero dimension"));
        }
        if data.len() != channels * height * width {
            return invalid(format!(
                "image data has {} values, expected {}",
                data.len(),
                channels * height * width
            ));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return invalid(format!("image value {v} outside [0, 1]"));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        assert!(channels > 0 && height > 0 && width > 0, "empty image shape");
        assert!((0.0..=1.0).contains(&value), "fill value outside [0, 1]");
        Self { channels, height, width, data: vec![value; channels * height * width] }
    }

    /// Builds an image by evaluating `f(channel, row, col)`; values are clamped to `[0, 1]`.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        assert!(channels > 0 && height > 0 && width > 0, "empty image shape");
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x).clamp(0.0, 1.0));
                }
            }
        }
        Self { channels, height, width, data }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Copies pixel `idx` (row-major over H×W) from `src` into `self` across all channels.
    pub fn copy_pixel_from(&mut self, src: &ImageTensor, idx: usize) {
        debug_assert_eq!(self.shape(), src.shape());
        let n = self.height * self.width;
        for c in 0..self.channels {
            self.data[c * n + idx] = src.data[c * n + idx];
        }
    }

    pub(crate) fn from_raw(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        Self { channels, height, width, data }
    }
}

/// A single-channel H×W grid of finite reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Map2D {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Map2D {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return invalid(format!("map shape {height}x{width} has a zero dimension"));
        }
        if data.len() != height * width {
            return invalid(format!("map data has {} values, expected {}", data.len(), height * width));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return invalid("map contains a non-finite value");
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "empty map shape");
        Self { height, width, data: vec![value; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "empty map shape");
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Row-major index of the largest value; the first one wins on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Map2D {
        Map2D { height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self { height, width, data }
    }
}

/// Normalized 1-D Gaussian taps `exp(-x²/2σ²)` for `x = -r..=r`, `ksize = 2r + 1`.
pub fn gaussian_kernel(ksize: usize, sigma: f64) -> Result<Vec<f64>> {
    if ksize == 0 || ksize % 2 == 0 {
        return invalid(format!("blur kernel size must be odd and positive, got {ksize}"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return invalid(format!("blur sigma must be positive, got {sigma}"));
    }
    let radius = (ksize / 2) as f64;
    let taps: Vec<f64> = (0..ksize)
        .map(|i| {
            let x = i as f64 - radius;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / total).collect())
}

/// Maps an out-of-range index back into `0..n` by mirroring about the edge pixels
/// (`d c b | a b c d | c b a`), folding repeatedly when the offset exceeds `n`.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - j;
    }
    j as usize
}

/// Separable Gaussian blur applied per channel with reflect padding.
///
/// Each output is accumulated as `x + Σ k·(neighbour − x)`, which equals `Σ k·neighbour`
/// for a normalized kernel but returns constants bit-exactly.
pub fn gaussian_blur2d(img: &ImageTensor, ksize: usize, sigma: f64) -> Result<ImageTensor> {
    let kernel = gaussian_kernel(ksize, sigma)?;
    let (c, h, w) = img.shape();
    let r = (ksize / 2) as isize;
    let mut horiz = vec![0.0; c * h * w];
    let mut out = vec![0.0; c * h * w];
    let col_idx: Vec<Vec<usize>> = (0..w)
        .map(|x| (0..ksize).map(|t| reflect_index(x as isize + t as isize - r, w)).collect())
        .collect();
    let row_idx: Vec<Vec<usize>> = (0..h)
        .map(|y| (0..ksize).map(|t| reflect_index(y as isize + t as isize - r, h)).collect())
        .collect();

    for ch in 0..c {
        let src = img.plane(ch);
        let dst = &mut horiz[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            for x in 0..w {
                let centre = row[x];
                let mut acc = 0.0;
                for (k, &sx) in kernel.iter().zip(&col_idx[x]) {
                    acc += k * (row[sx] - centre);
                }
                dst[y * w + x] = centre + acc;
            }
        }
    }
    for ch in 0..c {
        let src = &horiz[ch * h * w..(ch + 1) * h * w];
        let dst = &mut out[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let centre = src[y * w + x];
                let mut acc = 0.0;
                for (k, &sy) in kernel.iter().zip(&row_idx[y]) {
                    acc += k * (src[sy * w + x] - centre);
                }
                dst[y * w + x] = (centre + acc).clamp(0.0, 1.0);
            }
        }
    }
    Ok(ImageTensor::from_raw(c, h, w, out))
}

/// Source coordinate and interpolation weight along one axis (half-pixel centres, no corner
/// alignment, clamped to the valid range).
fn bilinear_taps(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let s = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let lo = s.floor() as usize;
    let hi = (lo + 1).min(src_len - 1);
    (lo, hi, s - lo as f64)
}

fn lerp_bounded(a: f64, b: f64, t: f64) -> f64 {
    ((1.0 - t) * a + t * b).clamp(a.min(b), a.max(b))
}

/// Bilinear resampling of `m` to `height`×`width`.
pub fn bilinear_upsample(m: &Map2D, height: usize, width: usize) -> Result<Map2D> {
    if height == 0 || width == 0 {
        return invalid(format!("target size {height}x{width} has a zero dimension"));
    }
    if m.height == height && m.width == width {
        return Ok(m.clone());
    }
    let xs: Vec<_> = (0..width).map(|x| bilinear_taps(x, m.width, width)).collect();
    let mut data = Vec::with_capacity(height * width);
    for y in 0..height {
        let (y0, y1, ty) = bilinear_taps(y, m.height, height);
        for &(x0, x1, tx) in &xs {
            let top = lerp_bounded(m.get(y0, x0), m.get(y0, x1), tx);
            let bottom = lerp_bounded(m.get(y1, x0), m.get(y1, x1), tx);
            data.push(lerp_bounded(top, bottom, ty));
        }
    }
    Ok(Map2D::from_raw(height, width, data))
}

/// Rescales to `[0, 1]`; a constant map becomes all zeros.
pub fn minmax_normalize(m: &Map2D) -> Map2D {
    let (lo, hi) = (m.min(), m.max());
    if hi <= lo {
        return Map2D::filled(m.height, m.width, 0.0);
    }
    let span = hi - lo;
    m.map(|v| ((v - lo) / span).clamp(0.0, 1.0))
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=100.0).contains(&theta) {
        return invalid(format!("percentile {theta} outside [0, 100]"));
    }
    Ok(())
}

/// Zero-based nearest-rank position for the `theta`-th percentile of `n` sorted values.
pub fn nearest_rank(theta: f64, n: usize) -> usize {
    let rank = (theta * n as f64 / 100.0).ceil() as usize;
    rank.clamp(1, n) - 1
}

/// Nearest-rank percentile over every pixel, zeros included.
pub fn percentile(m: &Map2D, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let mut sorted = m.data.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[nearest_rank(theta, sorted.len())])
}

/// Keeps pixels strictly above the `theta`-th percentile and zeroes the rest.
pub fn denoise(m: &Map2D, theta: f64) -> Result<Map2D> {
    let p = percentile(m, theta)?;
    Ok(m.map(|v| if v > p { v } else { 0.0 }))
}

pub fn relu(m: &Map2D) -> Map2D {
    m.map(|v| v.max(0.0))
}

/// Per-pixel `original·mask + baseline·(1 − mask)` with the mask broadcast over channels.
pub fn blend(original: &ImageTensor, baseline: &ImageTensor, mask: &Map2D) -> Result<ImageTensor> {
    if original.shape() != baseline.shape() {
        return invalid(format!(
            "blend inputs differ in shape: {:?} vs {:?}",
            original.shape(),
            baseline.shape()
        ));
    }
    if mask.height != original.height || mask.width != original.width {
        return invalid(format!(
            "mask is {}x{} but image is {}x{}",
            mask.height, mask.width, original.height, original.width
        ));
    }
    let n = mask.len();
    let data = original
        .data
        .iter()
        .zip(&baseline.data)
        .enumerate()
        .map(|(i, (&o, &b))| {
            let m = mask.data[i % n];
            (o * m + b * (1.0 - m)).clamp(0.0, 1.0)
        })
        .collect();
    Ok(ImageTensor::from_raw(original.channels, original.height, original.width, data))
}
