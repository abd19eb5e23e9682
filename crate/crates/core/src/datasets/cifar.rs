//! CIFAR-10 binary batches: each record is one label byte followed by 3072
//! pixel bytes, stored as three 32x32 planes (R, G, B).

use std::path::Path;

use super::{read_file, DataError, ImageSet};

pub const CIFAR_RECORD_BYTES: usize = 3073;
pub const CIFAR_CLASSES: usize = 10;
const SIDE: usize = 32;
const CHANNELS: usize = 3;

fn empty_set() -> ImageSet {
    ImageSet {
        pixels: Vec::new(),
        labels: Vec::new(),
        height: SIDE,
        width: SIDE,
        channels: CHANNELS,
        classes: CIFAR_CLASSES,
    }
}

fn append_records(set: &mut ImageSet, bytes: &[u8]) {
    for rec in bytes.chunks_exact(CIFAR_RECORD_BYTES) {
        set.labels.push(rec[0]);
        set.pixels.extend_from_slice(&rec[1..]);
    }
}

/// Parses one in-memory batch.
pub fn parse_cifar(bytes: &[u8]) -> Result<ImageSet, DataError> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_BYTES) {
        return Err(DataError::RecordSize {
            path: "<memory>".into(),
            len: bytes.len(),
            record: CIFAR_RECORD_BYTES,
        });
    }
    let mut set = empty_set();
    append_records(&mut set, bytes);
    set.check_labels()?;
    Ok(set)
}

/// Concatenates the records of every batch file, in the order given.
pub fn load_cifar<P: AsRef<Path>>(paths: &[P]) -> Result<ImageSet, DataError> {
    let mut set = empty_set();
    for p in paths {
        let p = p.as_ref();
        let bytes = read_file(p)?;
        if !bytes.len().is_multiple_of(CIFAR_RECORD_BYTES) {
            return Err(DataError::RecordSize {
                path: p.to_path_buf(),
                len: bytes.len(),
                record: CIFAR_RECORD_BYTES,
            });
        }
        append_records(&mut set, &bytes);
    }
    set.check_labels()?;
    Ok(set)
}
