use crate::image::Image;
use crate::rng::Normals;
use crate::{Error, Result};

/// Adds i.i.d. zero-mean Gaussian noise of the given variance in the
/// normalized [0, 1] domain, then clamps and requantizes. Variates are
/// drawn in plane-major pixel order from [`Normals`] seeded with `seed`.
pub fn add_gaussian_noise(img: &Image, variance: f64, seed: u64) -> Result<Image> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Parameter(format!(
            "noise variance must be finite and >= 0, got {variance}"
        )));
    }
    if variance == 0.0 {
        return Ok(img.clone());
    }
    let std = variance.sqrt();
    let mut normals = Normals::new(seed);
    let noisy: Vec<f64> = img
        .to_normalized()
        .into_iter()
        .map(|v| v + std * normals.next())
        .collect();
    Image::from_normalized(&noisy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::IMAGE_BYTES;

    #[test]
    fn zero_variance_is_identity() {
        let bytes: Vec<u8> = (0..IMAGE_BYTES).map(|i| (i % 256) as u8).collect();
        let img = Image::from_planes(&bytes).unwrap();
        assert_eq!(add_gaussian_noise(&img, 0.0, 1).unwrap(), img);
    }

    #[test]
    fn deterministic_per_seed() {
        let img = Image::filled([128, 128, 128]);
        let a = add_gaussian_noise(&img, 0.01, 42).unwrap();
        assert_eq!(a, add_gaussian_noise(&img, 0.01, 42).unwrap());
        assert_ne!(a, add_gaussian_noise(&img, 0.01, 43).unwrap());
    }

    #[test]
    fn empirical_variance_matches() {
        // Mid-gray keeps clamping negligible at v = 0.01 (5σ from the rails).
        let img = Image::filled([128, 128, 128]);
        let mean_in = 128.0 / 255.0;
        let (mut n, mut sum, mut sum_sq) = (0usize, 0.0, 0.0);
        let mut seed = 0;
        while n < 1_000_000 {
            let out = add_gaussian_noise(&img, 0.01, seed).unwrap();
            for &b in out.planes() {
                let d = f64::from(b) / 255.0 - mean_in;
                sum += d;
                sum_sq += d * d;
            }
            n += IMAGE_BYTES;
            seed += 1;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((var - 0.01).abs() / 0.01 < 0.05, "variance {var}");
        assert!(mean.abs() < 1e-3, "mean {mean}");
    }

    #[test]
    fn negative_variance_rejected() {
        let img = Image::filled([0, 0, 0]);
        assert!(matches!(add_gaussian_noise(&img, -0.1, 0), Err(Error::Parameter(_))));
    }
}
