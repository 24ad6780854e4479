use std::path::{Path, PathBuf};

use super::{LabeledSample, NUM_CLASSES};
use crate::image::IMAGE_BYTES;
use crate::{Error, Image, Result};

/// One label byte followed by 3072 plane-major pixel bytes.
pub const RECORD_BYTES: usize = 1 + IMAGE_BYTES;
pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

#[derive(Debug, Clone)]
pub struct Cifar10 {
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

/// Accepts either the directory holding the `.bin` files or its parent
/// (the layout the official archive unpacks to).
pub fn resolve_dir(path: &Path) -> PathBuf {
    let nested = path.join("cifar-10-batches-bin");
    if !path.join(TEST_FILE).exists() && nested.join(TEST_FILE).exists() {
        nested
    } else {
        path.to_path_buf()
    }
}

/// The six batch files, training batches first.
pub fn dataset_files(dir: &Path) -> Vec<PathBuf> {
    TRAIN_FILES
        .iter()
        .chain(std::iter::once(&TEST_FILE))
        .map(|f| dir.join(f))
        .collect()
}

pub fn read_batch_file(path: &Path) -> Result<Vec<LabeledSample>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let whole = bytes.len() / RECORD_BYTES;
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::TruncatedRecord {
            path: path.to_path_buf(),
            record: whole,
            offset: (whole * RECORD_BYTES) as u64,
        });
    }
    bytes
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, rec)| {
            if usize::from(rec[0]) >= NUM_CLASSES {
                return Err(Error::CorruptRecord {
                    path: path.to_path_buf(),
                    record: i,
                    offset: (i * RECORD_BYTES) as u64,
                    label: rec[0],
                });
            }
            Ok(LabeledSample::pristine(Image::from_planes(&rec[1..])?, rec[0]))
        })
        .collect()
}

/// Loads the five training batches and the test batch. The official
/// archive yields 50,000 and 10,000 pristine samples.
pub fn load_cifar10(path: &Path) -> Result<Cifar10> {
    let dir = resolve_dir(path);
    let mut train = Vec::new();
    for f in TRAIN_FILES {
        train.extend(read_batch_file(&dir.join(f))?);
    }
    let test = read_batch_file(&dir.join(TEST_FILE))?;
    Ok(Cifar10 { train, test })
}

/// Writes samples in the batch-file record format.
pub fn write_batch_file(path: &Path, samples: &[LabeledSample]) -> Result<()> {
    let mut bytes = Vec::with_capacity(samples.len() * RECORD_BYTES);
    for s in samples {
        bytes.push(s.label);
        bytes.extend_from_slice(s.image.planes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: u8, fill: u8) -> Vec<u8> {
        let mut r = vec![fill; RECORD_BYTES];
        r[0] = label;
        r
    }

    #[test]
    fn reads_records_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.bin");
        let mut bytes = record(3, 9);
        bytes.extend(record(7, 200));
        bytes[1 + 1024] = 42; // first G sample of record 0
        std::fs::write(&path, &bytes).unwrap();
        let s = read_batch_file(&path).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].label, 3);
        assert_eq!(s[0].label, bytes[0]);
        assert_eq!(s[0].image.get(1, 0, 0), 42);
        assert_eq!(s[1].image.get(2, 31, 31), 200);
        assert!(s.iter().all(|x| x.quality == 1.0));
    }

    #[test]
    fn truncated_file_names_record_and_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let mut bytes = record(1, 0);
        bytes.extend(record(2, 0));
        bytes.truncate(RECORD_BYTES + 100);
        std::fs::write(&path, &bytes).unwrap();
        match read_batch_file(&path) {
            Err(Error::TruncatedRecord { record, offset, .. }) => {
                assert_eq!(record, 1);
                assert_eq!(offset, RECORD_BYTES as u64);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_label_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let mut bytes = record(1, 0);
        bytes.extend(record(10, 0));
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_batch_file(&path),
            Err(Error::CorruptRecord { record: 1, label: 10, .. })
        ));
    }

    #[test]
    fn missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_cifar10(dir.path()).unwrap_err();
        assert!(err.to_string().contains("data_batch_1.bin"), "{err}");
        assert!(err.is_data_error());
    }
}
