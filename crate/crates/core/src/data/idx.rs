//! IDX reader/writer (the MNIST container).
//!
//! Images: magic `0x00000803`, then `count`, `rows`, `cols` as big-endian
//! `u32`, then `count·rows·cols` unsigned bytes in row-major order.
//! Labels: magic `0x00000801`, `count`, then one byte per label.
//! Gzip-compressed files are detected by their magic bytes and inflated.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw (uncompressed) IDX file contents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxBytes {
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn header(bytes: &[u8], path: &Path, magic: u32, words: usize) -> Result<Vec<u32>> {
    let need = 4 * words;
    if bytes.len() < need {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: need,
            found: bytes.len(),
        });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found,
        });
    }
    Ok((1..words).map(|i| be_u32(bytes, 4 * i)).collect())
}

fn payload<'a>(bytes: &'a [u8], path: &Path, offset: usize, len: usize) -> Result<&'a [u8]> {
    let expected = offset + len;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes {
            path: path.to_path_buf(),
            extra: bytes.len() - expected,
        });
    }
    Ok(&bytes[offset..])
}

/// Parses in-memory IDX image and label files. The paths only label errors.
pub fn parse_idx(images: &[u8], labels: &[u8], images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let dims = header(images, images_path, IMAGES_MAGIC, 4)?;
    let (count, rows, cols) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    let pixels = payload(images, images_path, 16, count * rows * cols)?;

    let label_count = header(labels, labels_path, LABELS_MAGIC, 2)?[0] as usize;
    let label_bytes = payload(labels, labels_path, 8, label_count)?;
    if label_count != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let data = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    let x = Matrix::from_vec(count, rows * cols, data)?;
    Ok(Dataset {
        x,
        labels: Some(label_bytes.iter().map(|&b| usize::from(b)).collect()),
        class_names: None,
        image_dims: Some((rows, cols)),
    })
}

/// Reads an image file and its label file; pixels are scaled by 1/255.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = read_maybe_gz(ip)?;
    let labels = read_maybe_gz(lp)?;
    parse_idx(&images, &labels, ip, lp)
}

/// Serializes a labelled image dataset back to IDX bytes; the exact inverse
/// of [`parse_idx`] for data that came from it.
pub fn encode_idx(d: &Dataset) -> Result<IdxBytes> {
    let (rows, cols) = d
        .image_dims
        .ok_or_else(|| Error::invalid("dataset has no image dimensions"))?;
    if rows * cols != d.x.cols() {
        return Err(Error::invalid(format!(
            "image dims {rows}x{cols} do not match {} features",
            d.x.cols()
        )));
    }
    let labels = d.labels()?;
    let count = u32::try_from(d.len()).map_err(|_| Error::invalid("too many images for IDX"))?;

    let mut images = Vec::with_capacity(16 + d.x.len());
    for word in [IMAGES_MAGIC, count, rows as u32, cols as u32] {
        images.extend_from_slice(&word.to_be_bytes());
    }
    images.extend(d.x.as_slice().iter().map(|&v| (v * 255.0).round() as u8));

    let mut label_bytes = Vec::with_capacity(8 + labels.len());
    label_bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    label_bytes.extend_from_slice(&count.to_be_bytes());
    for &l in labels {
        let b = u8::try_from(l).map_err(|_| Error::invalid(format!("label {l} does not fit in a byte")))?;
        label_bytes.push(b);
    }
    Ok(IdxBytes { images, labels: label_bytes })
}
