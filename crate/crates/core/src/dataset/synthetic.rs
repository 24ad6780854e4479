//! Class-conditional textured images in CIFAR-10 layout, for exercising the
//! pipeline without the real archive.
//!
//! Class `k` draws an oriented sinusoidal grating (angle `18°·k`, period
//! 3 to 5 pixels depending on `k`) over a class-tinted background, with
//! per-sample phase, contrast, brightness and pixel noise. The fine
//! texture is what blur and heavy JPEG destroy.

use std::f64::consts::PI;
use std::path::Path;

use super::{write_batch_file, LabeledSample, NUM_CLASSES, TEST_FILE, TRAIN_FILES};
use crate::image::{quantize, CHANNELS, IMAGE_BYTES, PLANE, SIDE};
use crate::rng::{self, Normals};
use crate::{Error, Image, Result};

const TINTS: [[f64; 3]; NUM_CLASSES] = [
    [0.55, 0.45, 0.40],
    [0.40, 0.55, 0.45],
    [0.45, 0.40, 0.55],
    [0.50, 0.50, 0.40],
    [0.40, 0.50, 0.50],
    [0.50, 0.40, 0.50],
    [0.55, 0.50, 0.45],
    [0.45, 0.55, 0.50],
    [0.50, 0.45, 0.55],
    [0.48, 0.48, 0.48],
];

pub fn image(label: u8, seed: u64) -> Image {
    let k = usize::from(label) % NUM_CLASSES;
    let mut r = rng::rng(seed);
    let mut normals = Normals::new(rng::derive_seed(&[seed, 1]));
    let angle = PI * k as f64 / NUM_CLASSES as f64;
    let period = 3.0 + (k % 3) as f64;
    let phase = 2.0 * PI * rng::uniform_open0(&mut r);
    let contrast = 0.15 + 0.15 * rng::uniform_open0(&mut r);
    let shift = 0.2 * (rng::uniform_open0(&mut r) - 0.5);
    let (s, c) = angle.sin_cos();

    let mut bytes = vec![0u8; IMAGE_BYTES];
    for row in 0..SIDE {
        for col in 0..SIDE {
            let t = (col as f64 * c + row as f64 * s) * 2.0 * PI / period + phase;
            let wave = contrast * t.sin();
            for ch in 0..CHANNELS {
                let v = TINTS[k][ch] + shift + wave + 0.03 * normals.next();
                bytes[ch * PLANE + row * SIDE + col] = quantize(v.clamp(0.0, 1.0) * 255.0);
            }
        }
    }
    Image::from_planes(&bytes).expect("fixed-size buffer")
}

/// `n` samples with labels cycling through the classes, so any multiple of
/// ten is exactly balanced.
pub fn samples(n: usize, seed: u64) -> Vec<LabeledSample> {
    (0..n)
        .map(|i| {
            let label = (i % NUM_CLASSES) as u8;
            LabeledSample::pristine(image(label, rng::derive_seed(&[seed, i as u64])), label)
        })
        .collect()
}

/// Writes a directory laid out like the extracted archive:
/// `train` samples spread over the five training batches and `test`
/// samples in the test batch.
pub fn write_cifar_dir(dir: &Path, train: usize, test: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let all = samples(train, seed);
    let per = train.div_ceil(TRAIN_FILES.len()).max(1);
    for (i, f) in TRAIN_FILES.iter().enumerate() {
        let lo = (i * per).min(train);
        let hi = ((i + 1) * per).min(train);
        write_batch_file(&dir.join(f), &all[lo..hi])?;
    }
    write_batch_file(&dir.join(TEST_FILE), &samples(test, rng::derive_seed(&[seed, 0x7e57])))
}
