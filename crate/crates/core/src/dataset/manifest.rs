use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LabeledSample;
use crate::distort::DistortionKind;
use crate::{Error, Result};

/// One JSON line per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub index: usize,
    pub label: u8,
    /// 0 for the pristine bucket, otherwise the distortion level.
    pub bucket: u8,
    pub kind: Option<DistortionKind>,
    pub level: u8,
    pub quality: f64,
    pub digest: String,
}

pub fn manifest_records(samples: &[LabeledSample]) -> Vec<ManifestRecord> {
    samples
        .iter()
        .enumerate()
        .map(|(index, s)| ManifestRecord {
            index,
            label: s.label,
            bucket: s.provenance.level(),
            kind: s.provenance.kind(),
            level: s.provenance.level(),
            quality: s.quality,
            digest: s.image.digest(),
        })
        .collect()
}

/// Writes the JSONL manifest and returns its SHA-256.
pub fn write_manifest(path: &Path, samples: &[LabeledSample]) -> Result<String> {
    let mut out = Vec::new();
    for rec in manifest_records(samples) {
        serde_json::to_writer(&mut out, &rec).map_err(|e| Error::Config(e.to_string()))?;
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(crate::digest::sha256_hex(&out))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Manifest {
                path: path.to_path_buf(),
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}
