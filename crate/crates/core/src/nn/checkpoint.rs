//! Checkpoint container: a line-oriented text header terminated by `end`,
//! followed by raw little-endian `f32` tensors in declaration order (then
//! the optimizer velocity, when present).

use std::path::Path;

use super::params::{shapes, TENSOR_NAMES};
use super::{Architecture, ModelParams, TrainingConfig, INIT_SCHEME};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "IQALS-CHECKPOINT 1";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub arch: Architecture,
    pub config: TrainingConfig,
    pub strategy: Option<u8>,
    pub seed: u64,
    /// Completed epochs.
    pub epoch: usize,
    pub init: String,
}

impl CheckpointHeader {
    pub fn new(arch: Architecture, config: TrainingConfig, strategy: Option<u8>, epoch: usize) -> Self {
        Self {
            seed: config.seed,
            arch,
            config,
            strategy,
            epoch,
            init: INIT_SCHEME.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ModelParams<f32>,
    pub velocity: Option<ModelParams<f32>>,
}

fn bad(path: &Path, detail: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let tensors: Vec<String> = self
            .params
            .tensors()
            .iter()
            .map(|(n, t)| {
                let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
                format!("{n}:{}", dims.join("x"))
            })
            .collect();
        let payload_floats = self.params.num_params() * if self.velocity.is_some() { 2 } else { 1 };
        let mut text = String::new();
        text.push_str(CHECKPOINT_MAGIC);
        text.push('\n');
        text.push_str(&format!("arch-hash {}\n", h.arch.hash()));
        text.push_str(&format!("config-hash {}\n", h.config.trajectory_hash()));
        text.push_str(&format!(
            "strategy {}\n",
            h.strategy.map_or_else(|| "none".to_string(), |s| s.to_string())
        ));
        text.push_str(&format!("seed {}\n", h.seed));
        text.push_str(&format!("epoch {}\n", h.epoch));
        text.push_str(&format!("init {}\n", h.init));
        text.push_str(&format!("arch {}\n", serde_json::to_string(&h.arch).expect("serializable")));
        text.push_str(&format!("config {}\n", serde_json::to_string(&h.config).expect("serializable")));
        text.push_str(&format!("tensors {}\n", tensors.join(" ")));
        text.push_str(&format!("velocity {}\n", if self.velocity.is_some() { "yes" } else { "no" }));
        text.push_str(&format!("payload-bytes {}\n", payload_floats * 4));
        text.push_str("end\n");

        let mut out = text.into_bytes();
        out.reserve(payload_floats * 4);
        for p in std::iter::once(&self.params).chain(self.velocity.as_ref()) {
            for (_, t) in p.tensors() {
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    /// Writes the checkpoint atomically (temp file + rename) and returns the
    /// SHA-256 of its bytes.
    pub fn write(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes();
        let tmp = path.with_extension("partial");
        std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        Ok(crate::digest::sha256_hex(&bytes))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        let mut pos = 0;
        let mut first = true;
        loop {
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad(path, "header not terminated"))?;
            let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad(path, "header is not UTF-8"))?;
            pos += end + 1;
            if first {
                if line != CHECKPOINT_MAGIC {
                    return Err(bad(path, format!("unrecognized format line {line:?}")));
                }
                first = false;
                continue;
            }
            if line == "end" {
                break;
            }
            let (k, v) = line.split_once(' ').ok_or_else(|| bad(path, format!("malformed header line {line:?}")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| bad(path, format!("missing header field {k}")));
        let arch: Architecture =
            serde_json::from_str(get("arch")?).map_err(|e| bad(path, format!("architecture: {e}")))?;
        if arch.hash() != *get("arch-hash")? {
            return Err(bad(path, "architecture hash does not match its description"));
        }
        let config: TrainingConfig =
            serde_json::from_str(get("config")?).map_err(|e| bad(path, format!("config: {e}")))?;
        if config.trajectory_hash() != *get("config-hash")? {
            return Err(bad(path, "config hash does not match its description"));
        }
        let strategy = match get("strategy")?.as_str() {
            "none" => None,
            s => Some(s.parse().map_err(|_| bad(path, "bad strategy field"))?),
        };
        let seed = get("seed")?.parse().map_err(|_| bad(path, "bad seed field"))?;
        let epoch = get("epoch")?.parse().map_err(|_| bad(path, "bad epoch field"))?;
        let has_velocity = match get("velocity")?.as_str() {
            "yes" => true,
            "no" => false,
            _ => return Err(bad(path, "bad velocity field")),
        };
        let sizes: Vec<usize> = shapes(&arch).iter().map(|s| s.iter().product()).collect();
        let total: usize = sizes.iter().sum::<usize>() * if has_velocity { 2 } else { 1 };
        let declared: usize = get("payload-bytes")?.parse().map_err(|_| bad(path, "bad payload size"))?;
        let payload = &bytes[pos..];
        if declared != total * 4 || payload.len() != declared {
            return Err(bad(
                path,
                format!("payload is {} bytes, expected {}", payload.len(), total * 4),
            ));
        }
        let mut floats = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
        let mut take = || -> Result<ModelParams<f32>> {
            let data: Vec<Vec<f32>> = sizes.iter().map(|&n| floats.by_ref().take(n).collect()).collect();
            ModelParams::from_tensors(&arch, data)
        };
        let params = take()?;
        let velocity = if has_velocity { Some(take()?) } else { None };
        debug_assert_eq!(TENSOR_NAMES.len(), sizes.len());
        Ok(Self {
            header: CheckpointHeader {
                arch,
                config,
                strategy,
                seed,
                epoch,
                init: get("init")?.clone(),
            },
            params,
            velocity,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let arch = Architecture::tiny();
        Checkpoint {
            header: CheckpointHeader::new(arch.clone(), TrainingConfig::desk_scale(), Some(3), 7),
            params: ModelParams::init(&arch, 1),
            velocity: Some(ModelParams::init(&arch, 2)),
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let ck = sample();
        let digest = ck.write(&path).unwrap();
        assert_eq!(digest, crate::digest::sha256_file(&path).unwrap());
        let back = Checkpoint::read(&path).unwrap();
        assert_eq!(back.header, ck.header);
        assert_eq!(back.params.tensors(), ck.params.tensors());
        assert_eq!(
            back.velocity.unwrap().tensors(),
            ck.velocity.as_ref().unwrap().tensors()
        );
    }

    #[test]
    fn payload_is_little_endian_f32_in_order() {
        let ck = Checkpoint { velocity: None, ..sample() };
        let bytes = ck.to_bytes();
        let start = bytes.windows(4).position(|w| w == b"end\n").unwrap() + 4;
        let first = f32::from_le_bytes(bytes[start..start + 4].try_into().unwrap());
        assert_eq!(first, ck.params.conv1_w.data()[0]);
        assert_eq!(bytes.len() - start, ck.params.num_params() * 4);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = sample().to_bytes();
        let p = Path::new("mem");
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        let at = bytes.windows(7).position(|w| w == b"\"fc1\":6").unwrap();
        let mut tampered = bytes.clone();
        tampered[at + 6] = b'7';
        assert!(matches!(Checkpoint::from_bytes(&tampered, p), Err(Error::Checkpoint { .. })));
        assert!(Checkpoint::from_bytes(b"garbage\nend\n", p).is_err());
    }
}
