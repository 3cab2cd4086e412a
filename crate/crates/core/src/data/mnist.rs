//! IDX reader for the MNIST distribution files.

use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::LabeledDataset;
use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
const CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistSplit {
    Train,
    Test,
}

/// Upstream file names for a split inside `dir`: `(images, labels)`.
pub fn mnist_paths(dir: &Path, split: MnistSplit) -> (PathBuf, PathBuf) {
    let prefix = match split {
        MnistSplit::Train => "train",
        MnistSplit::Test => "t10k",
    };
    (
        dir.join(format!("{prefix}-images-idx3-ubyte")),
        dir.join(format!("{prefix}-labels-idx1-ubyte")),
    )
}

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| format_error(path, "truncated header"))
}

fn check_length(bytes: &[u8], expected: usize, path: &Path) -> Result<()> {
    if bytes.len() < expected {
        return Err(format_error(
            path,
            format!("truncated file: expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    if bytes.len() > expected {
        return Err(format_error(
            path,
            format!("unexpected trailing data: expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    Ok(())
}

/// Loads an image/label IDX pair. Pixels are scaled from `0..=255` to `[0, 1]`
/// and each image is flattened row-major.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let images = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;

    let magic = read_u32(&images, 0, images_path)?;
    if magic != IMAGE_MAGIC {
        return Err(format_error(images_path, format!("bad image magic {magic:#010x}")));
    }
    let count = read_u32(&images, 4, images_path)? as usize;
    let rows = read_u32(&images, 8, images_path)? as usize;
    let cols = read_u32(&images, 12, images_path)? as usize;
    let pixels = rows * cols;
    check_length(&images, 16 + count * pixels, images_path)?;

    let magic = read_u32(&labels, 0, labels_path)?;
    if magic != LABEL_MAGIC {
        return Err(format_error(labels_path, format!("bad label magic {magic:#010x}")));
    }
    let label_count = read_u32(&labels, 4, labels_path)? as usize;
    if label_count != count {
        return Err(format_error(
            labels_path,
            format!("{label_count} labels for {count} images"),
        ));
    }
    check_length(&labels, 8 + count, labels_path)?;

    let label_vec: Vec<usize> = labels[8..].iter().map(|&b| b as usize).collect();
    if let Some(&bad) = label_vec.iter().find(|&&l| l >= CLASSES) {
        return Err(format_error(labels_path, format!("label {bad} outside 0..10")));
    }
    let features = Array2::from_shape_vec(
        (count, pixels),
        images[16..].iter().map(|&p| f64::from(p) / 255.0).collect(),
    )
    .map_err(|e| format_error(images_path, e.to_string()))?;
    LabeledDataset::new(features, label_vec, CLASSES)
}
