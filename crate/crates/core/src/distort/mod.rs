//! Seeded distortion generators: Gaussian blur, additive white Gaussian
//! noise and baseline JPEG compression, each at three fixed levels.

mod blur;
pub mod jpeg;
mod noise;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Image, Result};

pub use blur::{blur_plane, gaussian_blur, gaussian_kernel};
pub use jpeg::{jpeg_encode, jpeg_roundtrip};
pub use noise::add_gaussian_noise;

pub const BLUR_SIGMAS: [f64; 3] = [0.7, 1.0, 1.2];
pub const NOISE_VARIANCES: [f64; 3] = [0.005, 0.01, 0.02];
pub const JPEG_QUALITIES: [u8; 3] = [12, 8, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortionKind {
    Blur,
    Noise,
    Jpeg,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 3] = [Self::Blur, Self::Noise, Self::Jpeg];

    pub fn name(self) -> &'static str {
        match self {
            Self::Blur => "blur",
            Self::Noise => "noise",
            Self::Jpeg => "jpeg",
        }
    }
}

impl fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistortionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "blur" => Ok(Self::Blur),
            "noise" => Ok(Self::Noise),
            "jpeg" | "jpg" => Ok(Self::Jpeg),
            other => Err(Error::Parameter(format!(
                "unknown distortion kind {other:?} (expected blur, noise or jpeg)"
            ))),
        }
    }
}

/// Generator parameter; exactly one applies per kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortionParam {
    Sigma(f64),
    Variance(f64),
    Quality(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    kind: DistortionKind,
    level: u8,
    param: DistortionParam,
}

impl DistortionSpec {
    /// The fixed level → parameter table: blur σ 0.7/1.0/1.2, noise
    /// variance 0.005/0.01/0.02, JPEG quality 12/8/4.
    pub fn at_level(kind: DistortionKind, level: u8) -> Result<Self> {
        if !(1..=3).contains(&level) {
            return Err(Error::Parameter(format!(
                "distortion level must be 1, 2 or 3, got {level}"
            )));
        }
        let i = usize::from(level - 1);
        let param = match kind {
            DistortionKind::Blur => DistortionParam::Sigma(BLUR_SIGMAS[i]),
            DistortionKind::Noise => DistortionParam::Variance(NOISE_VARIANCES[i]),
            DistortionKind::Jpeg => DistortionParam::Quality(JPEG_QUALITIES[i]),
        };
        Ok(Self { kind, level, param })
    }

    pub fn kind(&self) -> DistortionKind {
        self.kind
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn param(&self) -> DistortionParam {
        self.param
    }

    pub fn sigma(&self) -> Option<f64> {
        match self.param {
            DistortionParam::Sigma(s) => Some(s),
            _ => None,
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match self.param {
            DistortionParam::Variance(v) => Some(v),
            _ => None,
        }
    }

    pub fn quality(&self) -> Option<u8> {
        match self.param {
            DistortionParam::Quality(q) => Some(q),
            _ => None,
        }
    }
}

impl fmt::Display for DistortionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.kind, self.level)
    }
}

/// Dispatches to the matching generator. `seed` only affects noise.
pub fn apply(spec: &DistortionSpec, img: &Image, seed: u64) -> Result<Image> {
    match spec.param {
        DistortionParam::Sigma(sigma) => gaussian_blur(img, sigma),
        DistortionParam::Variance(v) => add_gaussian_noise(img, v, seed),
        DistortionParam::Quality(q) => jpeg_roundtrip(img, q),
    }
}

/// Something that turns a pristine image into a distorted one. The pipeline
/// uses [`StandardDistorter`]; tests substitute instrumented versions.
pub trait Distorter: Sync {
    fn distort(&self, spec: &DistortionSpec, img: &Image, seed: u64) -> Result<Image>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct StandardDistorter;

impl Distorter for StandardDistorter {
    fn distort(&self, spec: &DistortionSpec, img: &Image, seed: u64) -> Result<Image> {
        apply(spec, img, seed)
    }
}
