//! Baseline sequential JPEG: 8×8 float DCT, IJG-scaled quantization,
//! 4:2:0 chroma subsampling and the standard Huffman tables. The decoder
//! handles the baseline streams this encoder produces (and other plain
//! baseline files without restart markers).

mod decoder;
mod encoder;
mod tables;

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::image::{Image, SIDE};
use crate::{Error, Result};

pub use decoder::{decode, Decoded};
pub use encoder::encode;
pub use tables::scaled_quant_table;

/// Encodes a 32×32 image at the given quality factor.
pub fn jpeg_encode(img: &Image, quality: u8) -> Result<Vec<u8>> {
    check_quality(quality)?;
    encode(&img.to_rgb_interleaved(), SIDE, SIDE, quality)
}

/// Encode then decode, back to a raster of the original size.
pub fn jpeg_roundtrip(img: &Image, quality: u8) -> Result<Image> {
    let bytes = jpeg_encode(img, quality)?;
    let decoded = decode(&bytes)?;
    if decoded.width != SIDE || decoded.height != SIDE || decoded.components != 3 {
        return Err(Error::Jpeg(format!(
            "decoded {}x{}x{}, expected {SIDE}x{SIDE}x3",
            decoded.width, decoded.height, decoded.components
        )));
    }
    Image::from_rgb_interleaved(&decoded.pixels)
}

pub(crate) fn check_quality(quality: u8) -> Result<()> {
    if (1..=100).contains(&quality) {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "jpeg quality must be in [1, 100], got {quality}"
        )))
    }
}

/// Orthonormal 8-point DCT-II matrix: `m[u][x] = c(u)/2 · cos((2x+1)uπ/16)`.
fn dct_matrix() -> &'static [[f64; 8]; 8] {
    static M: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    M.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (u, row) in m.iter_mut().enumerate() {
            let c = if u == 0 { 0.5 / 2f64.sqrt() } else { 0.5 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = c * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos();
            }
        }
        m
    })
}

/// Forward 2-D DCT of a level-shifted 8×8 block (row-major, in place).
fn fdct(block: &mut [f64; 64]) {
    let m = dct_matrix();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| m[u][x] * block[y * 8 + x]).sum();
        }
    }
    for v in 0..8 {
        for u in 0..8 {
            block[v * 8 + u] = (0..8).map(|y| m[v][y] * tmp[y * 8 + u]).sum();
        }
    }
}

fn idct(block: &mut [f64; 64]) {
    let m = dct_matrix();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| m[u][x] * block[v * 8 + u]).sum();
        }
    }
    for y in 0..8 {
        for x in 0..8 {
            block[y * 8 + x] = (0..8).map(|v| m[v][y] * tmp[v * 8 + x]).sum();
        }
    }
}
