//! Real-data ingestion: MNIST IDX files, CIFAR-10 binary batches and a
//! delimiter-separated multitask table, plus the image transforms used by
//! the experiments.

mod cifar;
mod idx;
mod multitask;
mod transform;

pub use cifar::{load_cifar, parse_cifar, CIFAR_CLASSES, CIFAR_RECORD_BYTES};
pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
};
pub use multitask::{load_multitask_csv, read_multitask, MultitaskTable, MULTITASK_INPUTS, MULTITASK_TASKS};
pub use transform::{block_mean, downscale, pollute, upsample, Standardizer};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad magic number: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("trailing data: expected {expected} bytes, found {actual}")]
    TrailingBytes { expected: usize, actual: usize },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at index {index} is not below {classes}")]
    Label { index: usize, label: u8, classes: usize },
    #[error("{path}: size {len} is not a multiple of {record}")]
    RecordSize { path: PathBuf, len: usize, record: usize },
    #[error("row {row}: expected {expected} columns, found {found}")]
    Arity { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column}: cannot parse {value:?} as a finite number")]
    Parse { row: usize, column: usize, value: String },
    #[error("row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("image shape {actual:?} does not match expected {expected:?}")]
    Shape { expected: (usize, usize), actual: (usize, usize) },
    #[error("noise scale must be finite and non-negative, got {0}")]
    Sigma(f64),
}

/// Images stored as contiguous byte blocks, one per image, plus labels.
///
/// IDX images are row-major `height x width`; CIFAR images are channel
/// planar (`channels` planes of `height x width`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSet {
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub classes: usize,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_size(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let s = self.image_size();
        &self.pixels[i * s..(i + 1) * s]
    }

    /// Pixels of image `i` scaled to `[0, 1]`.
    pub fn features(&self, i: usize) -> Vec<f64> {
        self.image(i).iter().map(|&p| f64::from(p) / 255.0).collect()
    }

    pub fn label(&self, i: usize) -> usize {
        usize::from(self.labels[i])
    }

    fn check_labels(&self) -> Result<(), DataError> {
        match self.labels.iter().position(|&l| usize::from(l) >= self.classes) {
            Some(index) => Err(DataError::Label {
                index,
                label: self.labels[index],
                classes: self.classes,
            }),
            None => Ok(()),
        }
    }
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}
