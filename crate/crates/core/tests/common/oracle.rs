//! Slow, direct implementations used as references.

use groupcam::{ImageTensor, Map2D};

/// Mirror without repeating the edge pixel, folding until the index lands inside.
pub fn mirror(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

pub fn dense_blur(img: &ImageTensor, ksize: usize, sigma: f64) -> Vec<f64> {
    let r = (ksize / 2) as isize;
    let mut kernel = vec![vec![0.0; ksize]; ksize];
    let mut total = 0.0;
    for (dy, row) in kernel.iter_mut().enumerate() {
        for (dx, k) in row.iter_mut().enumerate() {
            let (y, x) = (dy as f64 - r as f64, dx as f64 - r as f64);
            *k = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
            total += *k;
        }
    }
    let (c, h, w) = img.shape();
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for dy in 0..ksize {
                    for dx in 0..ksize {
                        let sy = mirror(y as isize + dy as isize - r, h);
                        let sx = mirror(x as isize + dx as isize - r, w);
                        acc += kernel[dy][dx] / total * img.get(ch, sy, sx);
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

pub fn scalar_bilinear(m: &Map2D, oh: usize, ow: usize) -> Vec<f64> {
    let (ih, iw) = (m.height(), m.width());
    let mut out = Vec::with_capacity(oh * ow);
    for i in 0..oh {
        for j in 0..ow {
            let sy = ((i as f64 + 0.5) * ih as f64 / oh as f64 - 0.5).max(0.0).min((ih - 1) as f64);
            let sx = ((j as f64 + 0.5) * iw as f64 / ow as f64 - 0.5).max(0.0).min((iw - 1) as f64);
            let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(ih - 1), (x0 + 1).min(iw - 1));
            let (wy, wx) = (sy - y0 as f64, sx - x0 as f64);
            out.push(
                m.get(y0, x0) * (1.0 - wy) * (1.0 - wx)
                    + m.get(y0, x1) * (1.0 - wy) * wx
                    + m.get(y1, x0) * wy * (1.0 - wx)
                    + m.get(y1, x1) * wy * wx,
            );
        }
    }
    out
}

/// Smallest value `v` with at least `theta` percent of the map at or below it.
pub fn brute_percentile(values: &[f64], theta: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    *sorted
        .iter()
        .find(|&&v| values.iter().filter(|&&x| x <= v).count() as f64 >= theta * n as f64 / 100.0)
        .unwrap()
}
