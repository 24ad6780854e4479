use std::fmt;

use crate::{Error, Result};

pub const SIDE: usize = 32;
pub const CHANNELS: usize = 3;
pub const PLANE: usize = SIDE * SIDE;
pub const IMAGE_BYTES: usize = PLANE * CHANNELS;

/// A 32×32 RGB raster stored plane-major (all R, then G, then B; each plane
/// row-major), the layout CIFAR-10 records use on disk.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    bytes: Box<[u8]>,
}

impl Image {
    pub fn from_planes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != IMAGE_BYTES {
            return Err(Error::Dimension(format!(
                "expected {IMAGE_BYTES} plane-major bytes, got {}",
                bytes.len()
            )));
        }
        Ok(Self {
            bytes: bytes.into(),
        })
    }

    pub fn filled(rgb: [u8; 3]) -> Self {
        let mut bytes = vec![0u8; IMAGE_BYTES];
        for (c, v) in rgb.into_iter().enumerate() {
            bytes[c * PLANE..(c + 1) * PLANE].fill(v);
        }
        Self {
            bytes: bytes.into(),
        }
    }

    /// Builds an image from RGB-interleaved rows (`[r, g, b, r, g, b, ...]`).
    pub fn from_rgb_interleaved(rgb: &[u8]) -> Result<Self> {
        if rgb.len() != IMAGE_BYTES {
            return Err(Error::Dimension(format!(
                "expected {SIDE}x{SIDE} RGB raster ({IMAGE_BYTES} bytes), got {} bytes",
                rgb.len()
            )));
        }
        let mut bytes = vec![0u8; IMAGE_BYTES];
        for (i, px) in rgb.chunks_exact(3).enumerate() {
            for c in 0..CHANNELS {
                bytes[c * PLANE + i] = px[c];
            }
        }
        Ok(Self {
            bytes: bytes.into(),
        })
    }

    pub fn to_rgb_interleaved(&self) -> Vec<u8> {
        let mut rgb = vec![0u8; IMAGE_BYTES];
        for i in 0..PLANE {
            for c in 0..CHANNELS {
                rgb[i * 3 + c] = self.bytes[c * PLANE + i];
            }
        }
        rgb
    }

    pub fn planes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn plane(&self, channel: usize) -> &[u8] {
        &self.bytes[channel * PLANE..(channel + 1) * PLANE]
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> u8 {
        self.bytes[channel * PLANE + row * SIDE + col]
    }

    /// Plane-major values scaled to [0, 1].
    pub fn to_normalized(&self) -> Vec<f64> {
        self.bytes.iter().map(|&b| f64::from(b) / 255.0).collect()
    }

    /// Inverse of [`Image::to_normalized`]: values are clamped to [0, 1],
    /// scaled by 255 and rounded half away from zero.
    pub fn from_normalized(values: &[f64]) -> Result<Self> {
        if values.len() != IMAGE_BYTES {
            return Err(Error::Dimension(format!(
                "expected {IMAGE_BYTES} normalized values, got {}",
                values.len()
            )));
        }
        Self::from_byte_scale(values.iter().map(|v| v.clamp(0.0, 1.0) * 255.0))
    }

    /// Quantizes plane-major byte-scale reals (clamped to [0, 255]).
    pub(crate) fn from_byte_scale(values: impl Iterator<Item = f64>) -> Result<Self> {
        let bytes: Vec<u8> = values.map(quantize).collect();
        Self::from_planes(&bytes)
    }

    /// Writes the image as channel-last (row, col, channel) reals in [0, 1].
    pub fn write_normalized_hwc<T: num_traits::Float>(&self, out: &mut [T]) {
        assert_eq!(out.len(), IMAGE_BYTES);
        let scale = T::from(255.0).unwrap();
        for i in 0..PLANE {
            for c in 0..CHANNELS {
                out[i * CHANNELS + c] = T::from(self.bytes[c * PLANE + i]).unwrap() / scale;
            }
        }
    }

    /// Rec. 601 luma in byte scale, row-major.
    pub fn luminance(&self) -> Vec<f64> {
        let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
        (0..PLANE)
            .map(|i| luma(r[i], g[i], b[i]))
            .collect()
    }

    pub fn digest(&self) -> String {
        crate::digest::sha256_hex(&self.bytes)
    }
}

pub fn luma(r: u8, g: u8, b: u8) -> f64 {
    0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)
}

/// Rounds a byte-scale real half away from zero after clamping to [0, 255].
pub fn quantize(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Image")
            .field("digest", &&self.digest()[..12])
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn normalized_round_trip_is_identity(bytes in proptest::collection::vec(any::<u8>(), IMAGE_BYTES)) {
            let img = Image::from_planes(&bytes).unwrap();
            let back = Image::from_normalized(&img.to_normalized()).unwrap();
            prop_assert_eq!(back, img);
        }
    }

    #[test]
    fn interleaved_and_planar_agree() {
        let bytes: Vec<u8> = (0..IMAGE_BYTES).map(|i| (i * 7 % 251) as u8).collect();
        let img = Image::from_planes(&bytes).unwrap();
        let rgb = img.to_rgb_interleaved();
        assert_eq!(rgb[3 * 33 + 2], img.get(2, 1, 1));
        assert_eq!(Image::from_rgb_interleaved(&rgb).unwrap(), img);
    }

    #[test]
    fn wrong_size_rejected() {
        assert!(matches!(Image::from_planes(&[0; 10]), Err(Error::Dimension(_))));
    }

    #[test]
    fn hwc_layout() {
        let img = Image::filled([255, 0, 51]);
        let mut out = vec![0f32; IMAGE_BYTES];
        img.write_normalized_hwc(&mut out);
        assert_eq!(&out[..3], &[1.0, 0.0, 0.2]);
        assert!(img.luminance().iter().all(|&y| (y - (0.299 * 255.0 + 0.114 * 51.0)).abs() < 1e-9));
    }
}
