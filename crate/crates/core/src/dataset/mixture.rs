use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LabeledSample, Provenance};
use crate::distort::{DistortionKind, DistortionSpec, Distorter};
use crate::{iqa, rng, Error, Result};

/// Pristine, level 1, level 2, level 3.
pub const DEFAULT_RATIOS: [f64; 4] = [0.60, 0.15, 0.15, 0.10];

const BUCKET_STREAM: u64 = 0xB0C4;
const KIND_STREAM: u64 = 0x7E9E;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePlan {
    pub ratios: [f64; 4],
    pub seed: u64,
    /// Distortion types in play; with several, each distorted sample draws
    /// one uniformly.
    pub kinds: Vec<DistortionKind>,
}

impl MixturePlan {
    pub fn new(seed: u64, kinds: Vec<DistortionKind>) -> Self {
        Self {
            ratios: DEFAULT_RATIOS,
            seed,
            kinds,
        }
    }

    pub fn pristine_only(seed: u64) -> Self {
        Self {
            ratios: [1.0, 0.0, 0.0, 0.0],
            seed,
            kinds: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Config(format!("mixture ratios {:?} outside [0, 1]", self.ratios)));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("mixture ratios {:?} sum to {sum}, not 1", self.ratios)));
        }
        if self.kinds.is_empty() && self.ratios[1..].iter().any(|&r| r > 0.0) {
            return Err(Error::Config("distorted buckets requested but no distortion kinds given".into()));
        }
        Ok(())
    }
}

/// Integer bucket sizes summing to `n`: floors of `n · ratio`, with the
/// leftover samples handed to the largest fractional remainders (lowest
/// bucket first on ties).
pub fn largest_remainder(n: usize, ratios: &[f64; 4]) -> [usize; 4] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 4];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = sizes.iter().sum();
    for &b in order.iter().take(n.saturating_sub(assigned)) {
        sizes[b] += 1;
    }
    sizes
}

/// Builds one epoch's training list. Sample `i` of the output is sample
/// `i` of the input, either kept pristine or replaced by its distorted
/// version; bucket membership comes from a shuffle keyed on
/// `(plan.seed, epoch)` and per-sample randomness from
/// `(plan.seed, epoch, i)`, so serial and parallel runs agree.
pub fn build_epoch_mixture(
    pristine: &[LabeledSample],
    plan: &MixturePlan,
    distorter: &dyn Distorter,
    epoch: usize,
) -> Result<Vec<LabeledSample>> {
    plan.validate()?;
    let n = pristine.len();
    let sizes = largest_remainder(n, &plan.ratios);
    if sizes[0] == n {
        return Ok(pristine.to_vec());
    }

    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut order, &mut rng::rng(rng::derive_seed(&[plan.seed, epoch as u64, BUCKET_STREAM])));
    let mut level = vec![0u8; n];
    let mut start = sizes[0];
    for (b, &size) in sizes.iter().enumerate().skip(1) {
        for &i in &order[start..start + size] {
            level[i] = b as u8;
        }
        start += size;
    }

    pristine
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            if sample.provenance != Provenance::Pristine {
                return Err(Error::Parameter(format!("mixture input {i} is not pristine")));
            }
            if level[i] == 0 {
                return Ok(sample.clone());
            }
            let kind = if plan.kinds.len() == 1 {
                plan.kinds[0]
            } else {
                let mut r = rng::rng(rng::derive_seed(&[plan.seed, epoch as u64, i as u64, KIND_STREAM]));
                plan.kinds[rng::below(&mut r, plan.kinds.len() as u64) as usize]
            };
            let spec = DistortionSpec::at_level(kind, level[i])?;
            let seed = rng::derive_seed(&[plan.seed, epoch as u64, i as u64]);
            let image = distorter.distort(&spec, &sample.image, seed)?;
            let quality = iqa::ssim(&sample.image, &image)?.transformed;
            Ok(LabeledSample {
                image,
                label: sample.label,
                quality,
                provenance: Provenance::Distorted { kind, level: level[i] },
            })
        })
        .collect()
}
