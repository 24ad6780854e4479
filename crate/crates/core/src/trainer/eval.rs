use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{TestSetId, TestSets};
use crate::distort::{DistortionKind, DistortionSpec, Distorter};
use crate::image::IMAGE_BYTES;
use crate::nn::{forward, Architecture, Checkpoint, ModelParams, ProbDistribution, Tensor};
use crate::{rng, Error, Image, Result};

pub const EVAL_BATCH: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    pub image_id: usize,
    pub true_class: u8,
    pub kind: Option<DistortionKind>,
    /// 0 for pristine.
    pub level: u8,
    /// Softmax probability of the true class.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub set: String,
    pub index: usize,
    pub label: u8,
    pub predicted: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracies: Vec<(TestSetId, f64)>,
    pub confidences: Vec<ConfidenceRecord>,
    pub predictions: Vec<PredictionRecord>,
}

impl EvalReport {
    pub fn accuracy(&self, id: TestSetId) -> Option<f64> {
        self.accuracies.iter().find(|(i, _)| *i == id).map(|(_, a)| *a)
    }

    /// One `set<TAB>accuracy` row per test set, behind `#` header lines.
    pub fn to_text(&self, header: &[(String, String)]) -> String {
        let mut s = String::new();
        for (k, v) in header {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s.push_str("set\taccuracy\n");
        for (id, acc) in &self.accuracies {
            s.push_str(&format!("{id}\t{acc:.4}\n"));
        }
        s
    }

    pub fn write_predictions(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for p in &self.predictions {
            serde_json::to_writer(&mut out, p).map_err(|e| Error::Config(e.to_string()))?;
            out.push(b'\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&out).map_err(|e| Error::io(path, e))
    }
}

/// Softmax outputs for `images`, evaluated in batches of [`EVAL_BATCH`].
pub fn predict(params: &ModelParams<f32>, images: &[&Image]) -> Result<Vec<ProbDistribution>> {
    let arch = params.arch();
    if arch.input_len() != IMAGE_BYTES {
        return Err(Error::structure(
            "input",
            format!("checkpoint expects {} values per image, images have {IMAGE_BYTES}", arch.input_len()),
        ));
    }
    let chunks: Vec<Vec<ProbDistribution>> = images
        .par_chunks(EVAL_BATCH)
        .map(|chunk| {
            let mut data = vec![0f32; chunk.len() * IMAGE_BYTES];
            for (slot, img) in data.chunks_exact_mut(IMAGE_BYTES).zip(chunk) {
                img.write_normalized_hwc(slot);
            }
            let x = Tensor::new(&[chunk.len(), arch.input_side, arch.input_side, arch.input_channels], data)?;
            let pass = forward(params, &x)?;
            (0..chunk.len()).map(|i| Ok(pass.distribution(i))).collect()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Top-1 accuracy on every test set, the raw prediction dump, and
/// true-class confidences for the `probe` indices. Parameters are only
/// read.
pub fn evaluate(params: &ModelParams<f32>, sets: &TestSets, probe: &[usize]) -> Result<EvalReport> {
    let mut accuracies = Vec::new();
    let mut confidences = Vec::new();
    let mut predictions = Vec::new();
    for (id, samples) in &sets.sets {
        let images: Vec<&Image> = samples.iter().map(|s| &s.image).collect();
        let probs = predict(params, &images)?;
        let mut correct = 0usize;
        for (index, (s, p)) in samples.iter().zip(&probs).enumerate() {
            let predicted = p.argmax() as u8;
            correct += usize::from(predicted == s.label);
            predictions.push(PredictionRecord {
                set: id.to_string(),
                index,
                label: s.label,
                predicted,
            });
        }
        let acc = if samples.is_empty() { 0.0 } else { correct as f64 / samples.len() as f64 };
        accuracies.push((*id, acc));
        for &i in probe {
            let s = samples
                .get(i)
                .ok_or_else(|| Error::Parameter(format!("probe index {i} outside test set {id}")))?;
            confidences.push(ConfidenceRecord {
                image_id: i,
                true_class: s.label,
                kind: s.provenance.kind(),
                level: s.provenance.level(),
                confidence: probs[i].probs()[usize::from(s.label)],
            });
        }
    }
    Ok(EvalReport {
        accuracies,
        confidences,
        predictions,
    })
}

/// Evaluates a stored checkpoint, refusing it when its architecture is not
/// the expected one.
pub fn evaluate_checkpoint(
    ckpt: &Checkpoint,
    expected: Option<&Architecture>,
    sets: &TestSets,
    probe: &[usize],
) -> Result<EvalReport> {
    if let Some(arch) = expected {
        if ckpt.header.arch.hash() != arch.hash() {
            return Err(Error::structure(
                "checkpoint",
                format!("architecture {:?} does not match expected {:?}", ckpt.header.arch, arch),
            ));
        }
    }
    evaluate(&ckpt.params, sets, probe)
}

/// True-class confidence on the pristine image followed by each requested
/// level of `kind`; the result has `levels.len() + 1` entries.
pub fn confidence_trace(
    params: &ModelParams<f32>,
    image: &Image,
    label: u8,
    kind: DistortionKind,
    levels: &[u8],
    distorter: &dyn Distorter,
    seed: u64,
) -> Result<Vec<(u8, f64)>> {
    let mut variants = vec![(0u8, image.clone())];
    for &level in levels {
        let spec = DistortionSpec::at_level(kind, level)?;
        let img = distorter.distort(&spec, image, rng::derive_seed(&[seed, kind as u64, u64::from(level)]))?;
        variants.push((level, img));
    }
    let refs: Vec<&Image> = variants.iter().map(|(_, i)| i).collect();
    let probs = predict(params, &refs)?;
    let k = usize::from(label);
    if k >= params.arch().classes {
        return Err(Error::Label {
            label: k,
            classes: params.arch().classes,
        });
    }
    Ok(variants.iter().zip(&probs).map(|((l, _), p)| (*l, p.probs()[k])).collect())
}
