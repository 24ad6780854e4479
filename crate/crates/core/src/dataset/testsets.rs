use std::fmt;
use std::str::FromStr;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{read_batch_file, read_manifest, write_batch_file, write_manifest, LabeledSample, Provenance};
use crate::distort::{DistortionKind, DistortionSpec, Distorter, StandardDistorter};
use crate::{iqa, rng, Error, Result};

/// Seed for the evaluation sets. They are generated once from the test
/// split and must not change between strategies or runs.
pub const TEST_SET_SEED: u64 = 0x1A5E_7E57;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TestSetId {
    Pristine,
    Distorted(DistortionKind, u8),
}

impl TestSetId {
    /// Pristine first, then blur, noise and JPEG at levels 1 to 3.
    pub fn all() -> Vec<TestSetId> {
        let mut ids = vec![TestSetId::Pristine];
        for kind in DistortionKind::ALL {
            ids.extend((1..=3).map(|l| TestSetId::Distorted(kind, l)));
        }
        ids
    }

    pub fn spec(&self) -> Option<DistortionSpec> {
        match *self {
            TestSetId::Pristine => None,
            TestSetId::Distorted(kind, level) => DistortionSpec::at_level(kind, level).ok(),
        }
    }
}

impl fmt::Display for TestSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestSetId::Pristine => f.write_str("pristine"),
            TestSetId::Distorted(kind, level) => write!(f, "{}-{level}", kind.name()),
        }
    }
}

impl FromStr for TestSetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "pristine" {
            return Ok(TestSetId::Pristine);
        }
        let bad = || Error::Parameter(format!("unknown test set {s:?}"));
        let (kind, level) = s.rsplit_once('-').ok_or_else(bad)?;
        let kind: DistortionKind = kind.parse().map_err(|_| bad())?;
        let level: u8 = level.parse().map_err(|_| bad())?;
        DistortionSpec::at_level(kind, level).map_err(|_| bad())?;
        Ok(TestSetId::Distorted(kind, level))
    }
}

#[derive(Debug, Clone)]
pub struct TestSets {
    pub seed: u64,
    pub sets: Vec<(TestSetId, Vec<LabeledSample>)>,
}

impl TestSets {
    pub fn get(&self, id: TestSetId) -> Option<&[LabeledSample]> {
        self.sets.iter().find(|(i, _)| *i == id).map(|(_, s)| s.as_slice())
    }
}

pub fn build_test_sets(test: &[LabeledSample], seed: u64) -> Result<TestSets> {
    build_test_sets_with(test, seed, &StandardDistorter)
}

/// The pristine test split plus one fully distorted copy per
/// (type, level), each image paired with its quality score.
pub fn build_test_sets_with(test: &[LabeledSample], seed: u64, distorter: &dyn Distorter) -> Result<TestSets> {
    let mut sets = Vec::new();
    for id in TestSetId::all() {
        let samples = match id {
            TestSetId::Pristine => test.to_vec(),
            TestSetId::Distorted(kind, level) => {
                let spec = DistortionSpec::at_level(kind, level)?;
                test.par_iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let sample_seed = rng::derive_seed(&[seed, kind as u64, u64::from(level), i as u64]);
                        let image = distorter.distort(&spec, &s.image, sample_seed)?;
                        let quality = iqa::ssim(&s.image, &image)?.transformed;
                        Ok(LabeledSample {
                            image,
                            label: s.label,
                            quality,
                            provenance: Provenance::Distorted { kind, level },
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        sets.push((id, samples));
    }
    Ok(TestSets { seed, sets })
}

/// Summary written next to the stored test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSetIndex {
    pub seed: u64,
    pub sets: Vec<TestSetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSetEntry {
    pub name: String,
    pub count: usize,
    pub images_sha256: String,
    pub manifest_sha256: String,
}

pub const TEST_SET_INDEX: &str = "index.json";

/// Stores each set as `<name>.bin` (batch-file records) plus
/// `<name>.jsonl` (manifest with quality scores) and an `index.json`.
pub fn write_test_sets(dir: &Path, sets: &TestSets) -> Result<TestSetIndex> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (id, samples) in &sets.sets {
        let bin = dir.join(format!("{id}.bin"));
        write_batch_file(&bin, samples)?;
        let manifest_sha256 = write_manifest(&dir.join(format!("{id}.jsonl")), samples)?;
        entries.push(TestSetEntry {
            name: id.to_string(),
            count: samples.len(),
            images_sha256: crate::digest::sha256_file(&bin)?,
            manifest_sha256,
        });
    }
    let index = TestSetIndex {
        seed: sets.seed,
        sets: entries,
    };
    let path = dir.join(TEST_SET_INDEX);
    let mut json = serde_json::to_string_pretty(&index).map_err(|e| Error::Config(e.to_string()))?;
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(index)
}

/// Loads sets stored by [`write_test_sets`], checking every file against
/// the index digests.
pub fn read_test_sets(dir: &Path) -> Result<TestSets> {
    let path = dir.join(TEST_SET_INDEX);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: TestSetIndex = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: path.clone(),
        line: e.line(),
        detail: e.to_string(),
    })?;
    let mut sets = Vec::new();
    for entry in &index.sets {
        let id: TestSetId = entry.name.parse()?;
        let bin = dir.join(format!("{id}.bin"));
        let manifest = dir.join(format!("{id}.jsonl"));
        for (file, expected) in [(&bin, &entry.images_sha256), (&manifest, &entry.manifest_sha256)] {
            let found = crate::digest::sha256_file(file)?;
            if &found != expected {
                return Err(Error::DigestMismatch {
                    path: file.clone(),
                    expected: expected.clone(),
                    found,
                });
            }
        }
        let records = read_manifest(&manifest)?;
        let mut samples = read_batch_file(&bin)?;
        if records.len() != samples.len() || samples.len() != entry.count {
            return Err(Error::Manifest {
                path: manifest,
                line: records.len(),
                detail: format!("{} manifest lines for {} images", records.len(), samples.len()),
            });
        }
        for (s, r) in samples.iter_mut().zip(records) {
            s.quality = r.quality;
            s.provenance = match id {
                TestSetId::Pristine => Provenance::Pristine,
                TestSetId::Distorted(kind, level) => Provenance::Distorted { kind, level },
            };
        }
        sets.push((id, samples));
    }
    Ok(TestSets {
        seed: index.seed,
        sets,
    })
}
