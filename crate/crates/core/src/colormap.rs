//! Heatmap rendering with a fixed 256-entry viridis lookup table.

use std::sync::OnceLock;

use crate::error::{invalid, Result};
use crate::imgproc::{ImageTensor, Map2D};

const VIRIDIS_TABLE: &str = include_str!("../assets/viridis.txt");

/// The colormap as 8-bit sRGB triples, index 0 for saliency 0 and 255 for saliency 1.
pub fn viridis() -> &'static [[u8; 3]; 256] {
    static TABLE: OnceLock<[[u8; 3]; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [[0u8; 3]; 256];
        let rows = VIRIDIS_TABLE.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let mut n = 0;
        for (entry, line) in table.iter_mut().zip(rows) {
            for (slot, tok) in entry.iter_mut().zip(line.split_whitespace()) {
                *slot = tok.parse().expect("colormap asset holds u8 triples");
            }
            n += 1;
        }
        assert_eq!(n, 256, "colormap asset must hold 256 entries");
        table
    })
}

/// Table index for a saliency value in `[0, 1]`.
pub fn colormap_index(v: f64) -> usize {
    (v.clamp(0.0, 1.0) * 255.0).round() as usize
}

/// Alpha-blends the colormapped saliency over `img`. The result always has three channels;
/// single-channel inputs are broadcast to grey.
pub fn colormap_overlay(img: &ImageTensor, sal: &Map2D, alpha: f64) -> Result<ImageTensor> {
    if !(0.0..=1.0).contains(&alpha) {
        return invalid(format!("overlay alpha {alpha} outside [0, 1]"));
    }
    if sal.height() != img.height() || sal.width() != img.width() {
        return invalid(format!(
            "saliency is {}x{} but image is {}x{}",
            sal.height(),
            sal.width(),
            img.height(),
            img.width()
        ));
    }
    let table = viridis();
    let w = img.width();
    let src_channel = |c: usize| if img.channels() == 1 { 0 } else { c.min(img.channels() - 1) };
    Ok(ImageTensor::from_fn(3, img.height(), w, |c, y, x| {
        let colour = table[colormap_index(sal.get(y, x))][c] as f64 / 255.0;
        (1.0 - alpha) * img.get(src_channel(c), y, x) + alpha * colour
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image() -> ImageTensor {
        ImageTensor::from_fn(3, 4, 6, |c, y, x| ((c * 5 + y * 3 + x) % 9) as f64 / 8.0)
    }

    #[test]
    fn table_is_perceptually_ordered() {
        let t = viridis();
        let luma = |p: [u8; 3]| 0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64;
        assert!(t.windows(2).all(|w| luma(w[1]) >= luma(w[0]) - 0.5));
        assert_eq!(t[0], [68, 1, 84]);
        assert_eq!(t[255], [253, 231, 37]);
    }

    #[test]
    fn alpha_zero_returns_image() {
        let img = image();
        let sal = Map2D::from_fn(4, 6, |y, x| (y + x) as f64 / 8.0);
        assert_eq!(colormap_overlay(&img, &sal, 0.0).unwrap(), img);
    }

    #[test]
    fn alpha_one_uniform_zero_saliency_is_first_colour() {
        let out = colormap_overlay(&image(), &Map2D::filled(4, 6, 0.0), 1.0).unwrap();
        let c0 = viridis()[0];
        for c in 0..3 {
            assert!(out.plane(c).iter().all(|&v| v == c0[c] as f64 / 255.0));
        }
    }

    #[test]
    fn half_alpha_full_saliency_is_midpoint() {
        let img = image();
        let out = colormap_overlay(&img, &Map2D::filled(4, 6, 1.0), 0.5).unwrap();
        let top = viridis()[255];
        for c in 0..3 {
            for (o, i) in out.plane(c).iter().zip(img.plane(c)) {
                assert!((o - (i + top[c] as f64 / 255.0) / 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(colormap_overlay(&image(), &Map2D::filled(4, 5, 0.0), 0.5).is_err());
        assert!(colormap_overlay(&image(), &Map2D::filled(4, 6, 0.0), 1.5).is_err());
    }
}
