//! Synthetic squares-vs-circles images with tight bounding boxes.
//!
//! Sample `i` of a dataset depends only on `(seed, i)`: labels alternate (even indices are
//! squares), the background is uniform noise in `[0, 0.3]` and the shape is a flat colour
//! with every channel in `[0.7, 1.0]`. All values sit on the 8-bit grid `k/255`, so a PNG
//! round trip reproduces the in-memory images exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgproc::ImageTensor;

pub const SQUARE: usize = 0;
pub const CIRCLE: usize = 1;
pub const CLASS_NAMES: [&str; 2] = ["square", "circle"];

const BACKGROUND_MAX_LEVEL: u8 = 76; // 76/255 < 0.3
const SHAPE_MIN_LEVEL: u8 = 179; // 179/255 > 0.7

/// Square side as a fraction of the shorter image side.
const SQUARE_SIDE: std::ops::Range<f64> = 0.30..0.50;
/// Circle radius as a fraction of the shorter image side.
const CIRCLE_RADIUS: std::ops::Range<f64> = 0.15..0.25;

/// Axis-aligned box in integer pixels, origin top-left, serialized as `[x, y, w, h]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    /// Inclusive containment test for pixel (row, col).
    pub fn contains(&self, row: usize, col: usize) -> bool {
        let (row, col) = (row as u64, col as u64);
        let (x, y, w, h) = (self.x as u64, self.y as u64, self.w as u64, self.h as u64);
        w > 0 && h > 0 && col >= x && col < x + w && row >= y && row < y + h
    }

    pub fn within(&self, height: usize, width: usize) -> bool {
        (self.x as u64 + self.w as u64) <= width as u64 && (self.y as u64 + self.h as u64) <= height as u64
    }
}

impl From<[u32; 4]> for BBox {
    fn from(v: [u32; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureDatasetSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
}

impl FixtureDatasetSpec {
    pub fn new(seed: u64) -> Self {
        Self { channels: 3, height: 64, width: 64, seed }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: ImageTensor,
    pub label: usize,
    pub bbox: BBox,
}

pub fn sample_id(index: usize) -> String {
    format!("img_{index:05}")
}

fn level(v: u8) -> f64 {
    v as f64 / 255.0
}

/// Generates sample `index` of the dataset described by `spec`.
pub fn fixture_sample(spec: &FixtureDatasetSpec, index: usize) -> Sample {
    let (c, h, w) = (spec.channels, spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);

    let label = index % 2;
    let short = h.min(w) as f64;
    let colour: Vec<f64> = (0..c).map(|_| level(rng.gen_range(SHAPE_MIN_LEVEL..=255))).collect();

    let inside: Box<dyn Fn(usize, usize) -> bool> = if label == SQUARE {
        let side = ((rng.gen_range(SQUARE_SIDE) * short).round() as usize).clamp(1, h.min(w));
        let x0 = rng.gen_range(0..=w - side);
        let y0 = rng.gen_range(0..=h - side);
        Box::new(move |y, x| (y0..y0 + side).contains(&y) && (x0..x0 + side).contains(&x))
    } else {
        let r = (rng.gen_range(CIRCLE_RADIUS) * short).max(0.5);
        let cx = rng.gen_range(r..=(w as f64 - r));
        let cy = rng.gen_range(r..=(h as f64 - r));
        Box::new(move |y, x| {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            dx * dx + dy * dy <= r * r
        })
    };

    let mut data = vec![0.0; c * h * w];
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (w, h, 0, 0);
    for y in 0..h {
        for x in 0..w {
            let hit = inside(y, x);
            if hit {
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);
            }
            for ch in 0..c {
                let noise = level(rng.gen_range(0..=BACKGROUND_MAX_LEVEL));
                data[(ch * h + y) * w + x] = if hit { colour[ch] } else { noise };
            }
        }
    }
    let bbox = BBox::new(min_x as u32, min_y as u32, (max_x + 1 - min_x) as u32, (max_y + 1 - min_y) as u32);
    Sample { id: sample_id(index), image: ImageTensor::from_raw(c, h, w, data), label, bbox }
}

/// The first `n` samples of the dataset described by `spec`.
pub fn generate_fixture_dataset(spec: &FixtureDatasetSpec, n: usize) -> Result<Vec<Sample>> {
    if n == 0 {
        return invalid("dataset size must be at least 1");
    }
    if spec.channels == 0 || spec.height < 4 || spec.width < 4 {
        return invalid("fixture images must have channels and be at least 4x4");
    }
    Ok((0..n).map(|i| fixture_sample(spec, i)).collect())
}
