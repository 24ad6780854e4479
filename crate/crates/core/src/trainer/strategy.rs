use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distort::DistortionKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularization {
    /// One-hot targets.
    Original,
    /// Targets smoothed by each sample's quality score.
    IqaLs,
}

impl fmt::Display for Regularization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regularization::Original => "original",
            Regularization::IqaLs => "iqa-ls",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingSet {
    Pristine,
    MixBlur,
    MixNoise,
    MixJpeg,
    MixAll3,
}

impl TrainingSet {
    /// Distortion types mixed into each epoch; empty for the pristine set.
    pub fn kinds(self) -> Vec<DistortionKind> {
        match self {
            TrainingSet::Pristine => vec![],
            TrainingSet::MixBlur => vec![DistortionKind::Blur],
            TrainingSet::MixNoise => vec![DistortionKind::Noise],
            TrainingSet::MixJpeg => vec![DistortionKind::Jpeg],
            TrainingSet::MixAll3 => DistortionKind::ALL.to_vec(),
        }
    }
}

impl fmt::Display for TrainingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainingSet::Pristine => "pristine",
            TrainingSet::MixBlur => "mix-blur",
            TrainingSet::MixNoise => "mix-noise",
            TrainingSet::MixJpeg => "mix-jpeg",
            TrainingSet::MixAll3 => "mix-all3",
        })
    }
}

const TABLE: [(Regularization, TrainingSet); 9] = [
    (Regularization::Original, TrainingSet::Pristine),
    (Regularization::Original, TrainingSet::MixBlur),
    (Regularization::IqaLs, TrainingSet::MixBlur),
    (Regularization::Original, TrainingSet::MixNoise),
    (Regularization::IqaLs, TrainingSet::MixNoise),
    (Regularization::Original, TrainingSet::MixJpeg),
    (Regularization::IqaLs, TrainingSet::MixJpeg),
    (Regularization::Original, TrainingSet::MixAll3),
    (Regularization::IqaLs, TrainingSet::MixAll3),
];

/// One of the nine (regularization, training set) combinations. Only
/// these can be constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Strategy {
    id: u8,
}

impl Strategy {
    pub fn all() -> Vec<Strategy> {
        (1..=9).map(|id| Strategy { id }).collect()
    }

    pub fn from_id(id: u8) -> Result<Self> {
        if (1..=9).contains(&id) {
            Ok(Strategy { id })
        } else {
            Err(Error::Parameter(format!(
                "unknown strategy {id}; valid strategies are:\n{}",
                Self::listing()
            )))
        }
    }

    pub fn from_parts(regularization: Regularization, set: TrainingSet) -> Result<Self> {
        TABLE
            .iter()
            .position(|&row| row == (regularization, set))
            .map(|i| Strategy { id: i as u8 + 1 })
            .ok_or_else(|| Error::Parameter(format!("no strategy trains {set} with {regularization} labels")))
    }

    pub fn id(self) -> u8 {
        self.id
    }

    pub fn regularization(self) -> Regularization {
        TABLE[usize::from(self.id - 1)].0
    }

    pub fn training_set(self) -> TrainingSet {
        TABLE[usize::from(self.id - 1)].1
    }

    /// One line per strategy, e.g. `  3  iqa-ls    mix-blur`.
    pub fn listing() -> String {
        Self::all()
            .iter()
            .map(|s| format!("  {}  {:<9} {}", s.id, s.regularization().to_string(), s.training_set()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "strategy {} ({}, {})", self.id, self.regularization(), self.training_set())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().parse::<u8>() {
            Ok(id) => Self::from_id(id),
            Err(_) => Err(Error::Parameter(format!(
                "strategy must be a number; valid strategies are:\n{}",
                Self::listing()
            ))),
        }
    }
}
