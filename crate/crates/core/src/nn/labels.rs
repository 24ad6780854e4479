use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// A probability vector over the K classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbDistribution(Vec<f64>);

impl ProbDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Parameter("empty distribution".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Parameter(format!("probabilities outside [0, 1]: {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Parameter(format!("probabilities sum to {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(classes: usize) -> Self {
        Self(vec![1.0 / classes as f64; classes])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    /// Index of the largest probability (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// The 0-1 target: all mass on `label`.
pub fn onehot(label: usize, classes: usize) -> Result<ProbDistribution> {
    if label >= classes {
        return Err(Error::Label { label, classes });
    }
    let mut p = vec![0.0; classes];
    p[label] = 1.0;
    Ok(ProbDistribution(p))
}

/// Quality-driven target: mass `score` on the true class, the remainder
/// spread evenly over the other `classes - 1`.
pub fn smooth_labels(label: usize, score: f64, classes: usize) -> Result<ProbDistribution> {
    if label >= classes {
        return Err(Error::Label { label, classes });
    }
    if !(score > 0.0 && score <= 1.0) {
        return Err(Error::Score(score));
    }
    let rest = (1.0 - score) / (classes - 1) as f64;
    let mut p = vec![rest; classes];
    p[label] = score;
    Ok(ProbDistribution(p))
}
