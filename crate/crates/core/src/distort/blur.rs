use crate::image::{Image, CHANNELS, PLANE, SIDE};
use crate::{Error, Result};

/// Normalized 1-D Gaussian taps with radius `ceil(3σ)`; `σ = 0` yields the
/// identity kernel `[1.0]`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!(
            "blur sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(vec![1.0]);
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / sum).collect())
}

/// Mirror index without repeating the edge sample (`-1 → 1`, `n → n - 2`).
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

/// Separable Gaussian filtering of one real-valued plane with reflect
/// padding. No clamping or rounding.
pub fn blur_plane(plane: &[f64], width: usize, height: usize, sigma: f64) -> Result<Vec<f64>> {
    if plane.len() != width * height {
        return Err(Error::Dimension(format!(
            "plane has {} values, expected {width}x{height}",
            plane.len()
        )));
    }
    let kernel = gaussian_kernel(sigma)?;
    let r = (kernel.len() / 2) as isize;

    let mut rows = vec![0.0; plane.len()];
    for y in 0..height {
        let src = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            rows[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * src[reflect(x as isize + k as isize - r, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * rows[reflect(y as isize + k as isize - r, height) * width + x])
                .sum();
        }
    }
    Ok(out)
}

pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    let mut out = Vec::with_capacity(PLANE * CHANNELS);
    for c in 0..CHANNELS {
        let plane: Vec<f64> = img.plane(c).iter().map(|&b| f64::from(b)).collect();
        out.extend(blur_plane(&plane, SIDE, SIDE, sigma)?);
    }
    Image::from_byte_scale(out.into_iter())
}
