//! Full-reference quality scoring.
//!
//! SSIM is computed on Rec. 601 luma in byte scale with an 11×11 Gaussian
//! window (σ = 1.5), placed only where it fits entirely inside the image,
//! and averaged over all placements. The transformed score used for label
//! smoothing is the raw score floored at [`SCORE_FLOOR`] and capped at 1.

use serde::{Deserialize, Serialize};

use crate::image::{luma, Image, SIDE};
use crate::{Error, Result};

pub const WINDOW: usize = 11;
pub const WINDOW_SIGMA: f64 = 1.5;
pub const DYNAMIC_RANGE: f64 = 255.0;
pub const C1: f64 = (0.01 * DYNAMIC_RANGE) * (0.01 * DYNAMIC_RANGE);
pub const C2: f64 = (0.03 * DYNAMIC_RANGE) * (0.03 * DYNAMIC_RANGE);
/// Smallest transformed score; keeps the true-class target mass positive.
pub const SCORE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    /// Mean SSIM, in [-1, 1].
    pub raw: f64,
    /// `transform(raw)`, in (0, 1].
    pub transformed: f64,
}

impl QualityScore {
    pub fn from_raw(raw: f64) -> Self {
        Self {
            raw,
            transformed: transform(raw),
        }
    }

    pub fn pristine() -> Self {
        Self::from_raw(1.0)
    }
}

/// Maps a raw score into (0, 1]: identity above the floor, the floor at or
/// below it, and 1 above 1.
pub fn transform(raw: f64) -> f64 {
    if raw.is_nan() || raw <= SCORE_FLOOR {
        SCORE_FLOOR
    } else {
        raw.min(1.0)
    }
}

/// Normalized 1-D window taps; the 2-D window is their outer product.
pub fn window_taps() -> [f64; WINDOW] {
    let mut taps = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - c;
        *t = (-(d * d) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.map(|t| t / sum)
}

/// Valid-mode separable filtering with the SSIM window.
fn filter_valid(plane: &[f64], width: usize, height: usize, taps: &[f64; WINDOW]) -> Vec<f64> {
    let (ow, oh) = (width + 1 - WINDOW, height + 1 - WINDOW);
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        let src = &plane[y * width..];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&src[x..x + WINDOW]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..WINDOW).map(|k| taps[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Per-window SSIM values for two single-channel planes in byte scale.
/// Returns the map and its `(width, height)`.
pub fn ssim_map(
    reference: &[f64],
    distorted: &[f64],
    width: usize,
    height: usize,
) -> Result<(Vec<f64>, usize, usize)> {
    if reference.len() != width * height || distorted.len() != width * height {
        return Err(Error::Dimension(format!(
            "ssim inputs have {} and {} samples, expected {width}x{height}",
            reference.len(),
            distorted.len()
        )));
    }
    if width < WINDOW || height < WINDOW {
        return Err(Error::Dimension(format!(
            "ssim needs at least {WINDOW}x{WINDOW} pixels, got {width}x{height}"
        )));
    }
    let taps = window_taps();
    let products = |f: fn(f64, f64) -> f64| -> Vec<f64> {
        reference.iter().zip(distorted).map(|(&a, &b)| f(a, b)).collect()
    };
    let mu_x = filter_valid(reference, width, height, &taps);
    let mu_y = filter_valid(distorted, width, height, &taps);
    let e_xx = filter_valid(&products(|a, _| a * a), width, height, &taps);
    let e_yy = filter_valid(&products(|_, b| b * b), width, height, &taps);
    let e_xy = filter_valid(&products(|a, b| a * b), width, height, &taps);

    let map = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let sxx = e_xx[i] - mx * mx;
            let syy = e_yy[i] - my * my;
            let sxy = e_xy[i] - mx * my;
            ((2.0 * mx * my + C1) * (2.0 * sxy + C2))
                / ((mx * mx + my * my + C1) * (sxx + syy + C2))
        })
        .collect();
    Ok((map, width + 1 - WINDOW, height + 1 - WINDOW))
}

/// Mean SSIM between two byte-scale luma planes.
pub fn ssim_luma(reference: &[f64], distorted: &[f64], width: usize, height: usize) -> Result<f64> {
    let (map, _, _) = ssim_map(reference, distorted, width, height)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

/// SSIM between two interleaved RGB rasters of equal size.
pub fn ssim_rgb(
    reference: &[u8],
    distorted: &[u8],
    width: usize,
    height: usize,
) -> Result<QualityScore> {
    if reference.len() != distorted.len() {
        return Err(Error::Dimension(format!(
            "rasters differ in size ({} vs {} bytes)",
            reference.len(),
            distorted.len()
        )));
    }
    if reference.len() != width * height * 3 {
        return Err(Error::Dimension(format!(
            "{} bytes for a {width}x{height} RGB raster",
            reference.len()
        )));
    }
    let to_luma = |rgb: &[u8]| -> Vec<f64> {
        rgb.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect()
    };
    let raw = ssim_luma(&to_luma(reference), &to_luma(distorted), width, height)?;
    Ok(QualityScore::from_raw(raw))
}

pub fn ssim(reference: &Image, distorted: &Image) -> Result<QualityScore> {
    let raw = ssim_luma(&reference.luminance(), &distorted.luminance(), SIDE, SIDE)?;
    Ok(QualityScore::from_raw(raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::IMAGE_BYTES;
    use crate::rng;

    fn random_image(seed: u64) -> Image {
        let mut r = rng::rng(seed);
        let bytes: Vec<u8> = (0..IMAGE_BYTES)
            .map(|_| rng::below(&mut r, 256) as u8)
            .collect();
        Image::from_planes(&bytes).unwrap()
    }

    #[test]
    fn transform_examples() {
        assert_eq!(transform(0.75), 0.75);
        assert_eq!(transform(-0.2), 0.001);
        assert_eq!(transform(1.0), 1.0);
        assert_eq!(transform(1.0 + 1e-12), 1.0);
        assert_eq!(transform(SCORE_FLOOR), SCORE_FLOOR);
    }

    #[test]
    fn window_is_normalized() {
        let t = window_taps();
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(t[0], t[10]);
    }

    #[test]
    fn map_is_22_by_22() {
        let a = random_image(1);
        let (map, w, h) = ssim_map(&a.luminance(), &a.luminance(), 32, 32).unwrap();
        assert_eq!((w, h, map.len()), (22, 22, 484));
    }

    #[test]
    fn self_similarity_is_one() {
        for seed in 0..10 {
            let a = random_image(seed);
            let s = ssim(&a, &a).unwrap();
            assert!((s.raw - 1.0).abs() < 1e-9);
            assert_eq!(s.transformed, 1.0);
        }
    }

    #[test]
    fn inverted_image_scores_low() {
        let a = random_image(4);
        let inv: Vec<u8> = a.planes().iter().map(|b| 255 - b).collect();
        let s = ssim(&a, &Image::from_planes(&inv).unwrap()).unwrap();
        assert!(s.raw < 0.5, "{}", s.raw);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            ssim_luma(&[0.0; 100], &[0.0; 121], 11, 11),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(ssim_luma(&[0.0; 100], &[0.0; 100], 10, 10), Err(Error::Dimension(_))));
        assert!(ssim_rgb(&[0; 12], &[0; 9], 2, 2).is_err());
    }
}
