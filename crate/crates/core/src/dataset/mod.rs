//! CIFAR-10 ingestion, per-epoch distortion mixtures and the fixed
//! evaluation sets.

mod cifar;
mod manifest;
mod mixture;
pub mod synthetic;
mod testsets;

use serde::{Deserialize, Serialize};

use crate::distort::DistortionKind;
use crate::{Error, Image, Result};

pub use cifar::{
    dataset_files, load_cifar10, read_batch_file, resolve_dir, write_batch_file, Cifar10, RECORD_BYTES,
    TEST_FILE, TRAIN_FILES,
};
pub use manifest::{manifest_records, read_manifest, write_manifest, ManifestRecord};
pub use mixture::{build_epoch_mixture, largest_remainder, MixturePlan, DEFAULT_RATIOS};
pub use testsets::{
    build_test_sets, build_test_sets_with, read_test_sets, write_test_sets, TestSetEntry, TestSetId, TestSetIndex, TestSets,
    TEST_SET_INDEX, TEST_SET_SEED,
};

pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum Provenance {
    Pristine,
    Distorted { kind: DistortionKind, level: u8 },
}

impl Provenance {
    /// 0 for pristine, otherwise the distortion level.
    pub fn level(&self) -> u8 {
        match self {
            Provenance::Pristine => 0,
            Provenance::Distorted { level, .. } => *level,
        }
    }

    pub fn kind(&self) -> Option<DistortionKind> {
        match self {
            Provenance::Pristine => None,
            Provenance::Distorted { kind, .. } => Some(*kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub image: Image,
    pub label: u8,
    /// Transformed SSIM against the pristine original; 1.0 when pristine.
    pub quality: f64,
    pub provenance: Provenance,
}

impl LabeledSample {
    pub fn pristine(image: Image, label: u8) -> Self {
        Self {
            image,
            label,
            quality: 1.0,
            provenance: Provenance::Pristine,
        }
    }
}

/// Only blur, noise and JPEG may alter training images; photometric
/// augmentations (contrast, brightness, saturation, ...) are refused.
pub fn validate_augmentations(requested: &[String]) -> Result<()> {
    match requested.first() {
        None => Ok(()),
        Some(a) => Err(Error::Config(format!(
            "augmentation {a:?} is not allowed: training images may only carry the blur, noise or jpeg distortions"
        ))),
    }
}

/// Content digest over labels and pixels of a sample list.
pub fn samples_digest(samples: &[LabeledSample]) -> String {
    let mut d = crate::digest::StreamDigest::new();
    for s in samples {
        d.update(&[s.label]);
        d.update(s.image.planes());
        d.update(&s.quality.to_le_bytes());
    }
    d.finish()
}
