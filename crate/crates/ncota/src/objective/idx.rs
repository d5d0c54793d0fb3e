//! Image and label ingestion in the IDX on-disk format (the MNIST family),
//! with transparent gzip decompression.
//!
//! Each 28×28 grayscale image is scaled to [0, 1], average-pooled with
//! non-overlapping 4×4 blocks down to 7×7, flattened to 49 values, extended
//! with a constant bias of 1.0, and normalized to unit Euclidean norm,
//! yielding 50-dimensional features.

use super::{Feature, ObjectiveError};
use flate2::read::GzDecoder;
use std::io::Read;
use std::path::Path;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
const GZIP_PREFIX: [u8; 2] = [0x1f, 0x8b];

fn bad_file(path: &Path, reason: impl Into<String>) -> ObjectiveError {
    ObjectiveError::BadIdxFile { path: path.display().to_string(), reason: reason.into() }
}

/// Reads the whole file, inflating it first when it carries a gzip header.
fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>, ObjectiveError> {
    let raw = std::fs::read(path)?;
    if raw.starts_with(&GZIP_PREFIX) {
        let mut inflated = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut inflated)
            .map_err(|e| bad_file(path, format!("gzip decode failed: {e}")))?;
        Ok(inflated)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32, ObjectiveError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(bad_file(path, "truncated header"));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parsed IDX image file: `count` row-major `rows × cols` grayscale images.
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
    pub count: usize,
}

pub fn load_images(path: &Path) -> Result<IdxImages, ObjectiveError> {
    let bytes = read_maybe_gzip(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IMAGE_MAGIC {
        return Err(bad_file(path, format!("bad image magic 0x{magic:08x}")));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(bad_file(
            path,
            format!("truncated pixel data: {} bytes, expected {expected}", bytes.len()),
        ));
    }
    Ok(IdxImages { rows, cols, pixels: bytes[16..expected].to_vec(), count })
}

pub fn load_labels(path: &Path) -> Result<Vec<u8>, ObjectiveError> {
    let bytes = read_maybe_gzip(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != LABEL_MAGIC {
        return Err(bad_file(path, format!("bad label magic 0x{magic:08x}")));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    if bytes.len() < 8 + count {
        return Err(bad_file(path, "truncated label data"));
    }
    Ok(bytes[8..8 + count].to_vec())
}

/// Downsamples one 28×28 image by 4×4 mean pooling into 49 values in [0, 1].
fn pool_4x4(pixels: &[u8]) -> Vec<f64> {
    let mut pooled = Vec::with_capacity(49);
    for block_row in 0..7 {
        for block_col in 0..7 {
            let mut acc = 0.0;
            for dy in 0..4 {
                for dx in 0..4 {
                    let row = block_row * 4 + dy;
                    let col = block_col * 4 + dx;
                    acc += pixels[row * 28 + col] as f64 / 255.0;
                }
            }
            pooled.push(acc / 16.0);
        }
    }
    pooled
}

/// Loads an image/label file pair into unit-norm 50-dimensional features
/// (49 pooled pixels plus a bias of 1.0, normalized together).
pub fn ingest_fashion_mnist(
    images_path: &Path,
    labels_path: &Path,
) -> Result<Vec<Feature>, ObjectiveError> {
    let images = load_images(images_path)?;
    if images.rows != 28 || images.cols != 28 {
        return Err(bad_file(
            images_path,
            format!("expected 28x28 images, got {}x{}", images.rows, images.cols),
        ));
    }
    let labels = load_labels(labels_path)?;
    if labels.len() != images.count {
        return Err(bad_file(
            labels_path,
            format!("{} labels for {} images", labels.len(), images.count),
        ));
    }
    let mut features = Vec::with_capacity(images.count);
    for (idx, &label) in labels.iter().enumerate() {
        let pixels = &images.pixels[idx * 28 * 28..(idx + 1) * 28 * 28];
        let mut vector = pool_4x4(pixels);
        vector.push(1.0);
        let norm = crate::codec::l2_norm(&vector);
        for x in &mut vector {
            *x /= norm;
        }
        features.push(Feature { vector, label: label as usize });
    }
    Ok(features)
}
