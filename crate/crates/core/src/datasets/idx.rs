//! Big-endian IDX containers (the MNIST distribution format).

use std::path::Path;

use byteorder::{BigEndian, ByteOrder, WriteBytesExt};

use super::{read_file, DataError, ImageSet};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const MNIST_CLASSES: usize = 10;

fn header_word(bytes: &[u8], word: usize, header_len: usize) -> Result<u32, DataError> {
    if bytes.len() < header_len {
        return Err(DataError::Truncated {
            expected: header_len,
            actual: bytes.len(),
        });
    }
    Ok(BigEndian::read_u32(&bytes[4 * word..4 * word + 4]))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), DataError> {
    let found = header_word(bytes, 0, 4)?;
    if found != expected {
        return Err(DataError::BadMagic { expected, found });
    }
    Ok(())
}

fn check_len(bytes: &[u8], expected: usize) -> Result<(), DataError> {
    if bytes.len() < expected {
        return Err(DataError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(DataError::TrailingBytes {
            expected,
            actual: bytes.len(),
        });
    }
    Ok(())
}

/// Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>), DataError> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let n = header_word(bytes, 1, 16)? as usize;
    let rows = header_word(bytes, 2, 16)? as usize;
    let cols = header_word(bytes, 3, 16)? as usize;
    check_len(bytes, n.saturating_mul(rows).saturating_mul(cols).saturating_add(16))?;
    Ok((n, rows, cols, bytes[16..].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let n = header_word(bytes, 1, 8)? as usize;
    check_len(bytes, n.saturating_add(8))?;
    Ok(bytes[8..].to_vec())
}

/// Parses an IDX image file and its label file into one [`ImageSet`].
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<ImageSet, DataError> {
    let (n, height, width, pixels) = parse_idx_images(&read_file(images.as_ref())?)?;
    let labels = parse_idx_labels(&read_file(labels.as_ref())?)?;
    if labels.len() != n {
        return Err(DataError::CountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    let set = ImageSet {
        pixels,
        labels,
        height,
        width,
        channels: 1,
        classes: MNIST_CLASSES,
    };
    set.check_labels()?;
    Ok(set)
}

pub fn encode_idx_images(set: &ImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + set.pixels.len());
    for word in [IDX_IMAGES_MAGIC, set.len() as u32, set.height as u32, set.width as u32] {
        out.write_u32::<BigEndian>(word).expect("vec write");
    }
    out.extend_from_slice(&set.pixels);
    out
}

pub fn encode_idx_labels(set: &ImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + set.labels.len());
    for word in [IDX_LABELS_MAGIC, set.len() as u32] {
        out.write_u32::<BigEndian>(word).expect("vec write");
    }
    out.extend_from_slice(&set.labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ImageSet {
        ImageSet {
            pixels: (0..2 * 3 * 2).map(|v| v as u8 * 20).collect(),
            labels: vec![3, 9],
            height: 3,
            width: 2,
            channels: 1,
            classes: 10,
        }
    }

    #[test]
    fn labels_magic_is_checked() {
        let mut bytes = encode_idx_labels(&tiny());
        BigEndian::write_u32(&mut bytes[0..4], IDX_IMAGES_MAGIC);
        assert!(matches!(
            parse_idx_labels(&bytes),
            Err(DataError::BadMagic { expected: IDX_LABELS_MAGIC, found: IDX_IMAGES_MAGIC })
        ));
    }

    #[test]
    fn truncation_names_byte_counts() {
        let bytes = encode_idx_images(&tiny());
        let cut = &bytes[..bytes.len() - 5];
        match parse_idx_images(cut) {
            Err(DataError::Truncated { expected, actual }) => {
                assert_eq!(expected, 28);
                assert_eq!(actual, 23);
            }
            other => panic!("expected truncation, got {other:?}"),
        }
        assert!(matches!(parse_idx_images(&bytes[..3]), Err(DataError::Truncated { .. })));
    }

    #[test]
    fn encode_then_parse() {
        let set = tiny();
        let (n, h, w, px) = parse_idx_images(&encode_idx_images(&set)).unwrap();
        assert_eq!((n, h, w), (2, 3, 2));
        assert_eq!(px, set.pixels);
        assert_eq!(parse_idx_labels(&encode_idx_labels(&set)).unwrap(), set.labels);
    }
}
