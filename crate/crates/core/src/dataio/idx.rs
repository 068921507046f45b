//! MNIST IDX reader. Header integers are big-endian.

use std::fs;
use std::path::Path;

use super::{Dataset, Pixels};
use crate::backbone::Shape;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Truncated {
            expected: (at + 4) as u64,
            actual: bytes.len() as u64,
        })
}

fn check_len(bytes: &[u8], expected: u64, what: &str) -> Result<()> {
    let actual = bytes.len() as u64;
    if actual < expected {
        Err(Error::Truncated { expected, actual })
    } else if actual > expected {
        Err(Error::Format(format!(
            "{what}: {} trailing bytes after {expected} expected",
            actual - expected
        )))
    } else {
        Ok(())
    }
}

pub(crate) fn parse_idx_images(bytes: &[u8]) -> Result<(usize, Shape, Vec<u8>)> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "idx images: bad magic {magic:#010x} (expected {IDX_IMAGES_MAGIC:#010x})"
        )));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    check_len(bytes, 16 + (n * rows * cols) as u64, "idx images")?;
    Ok((n, Shape::new(rows, cols, 1), bytes[16..].to_vec()))
}

pub(crate) fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "idx labels: bad magic {magic:#010x} (expected {IDX_LABELS_MAGIC:#010x})"
        )));
    }
    let n = be_u32(bytes, 4)? as usize;
    check_len(bytes, 8 + n as u64, "idx labels")?;
    Ok(bytes[8..].iter().map(|&b| b as usize).collect())
}

/// Loads an IDX image file and, optionally, its label file. Pixels stay as
/// raw bytes; scaling to `[0, 1]` happens on access.
pub fn load_idx(images_path: &Path, labels_path: Option<&Path>) -> Result<Dataset> {
    let bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let (n, shape, pixels) = parse_idx_images(&bytes)?;
    let labels = match labels_path {
        Some(p) => {
            let lb = fs::read(p).map_err(|e| Error::io(p, e))?;
            let labels = parse_idx_labels(&lb)?;
            if labels.len() != n {
                return Err(Error::Consistency(format!(
                    "{} images but {} labels",
                    n,
                    labels.len()
                )));
            }
            Some(labels)
        }
        None => None,
    };
    let name = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    Dataset::new(name, shape, Pixels::Bytes(pixels), labels)
}
