//! IDX files (the MNIST container): big-endian header, `u8` payload.

use thiserror::Error;

use crate::error::{invalid, Result};
use crate::numerics::Matrix;

use super::Dataset;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdxError {
    #[error("unsupported magic number {0:#010x}")]
    BadMagic(u32),
    #[error("truncated idx data: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("idx dimensions {0:?} overflow the addressable size")]
    DimOverflow(Vec<u32>),
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum IdxData {
    /// Images flattened row-wise and scaled to `[0, 1]`.
    Images { rows: usize, cols: usize, pixels: Matrix },
    Labels(Vec<u8>),
}

fn be_u32(bytes: &[u8], at: usize) -> std::result::Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or(IdxError::Truncated { expected: at + 4, actual: bytes.len() })
}

pub fn parse_idx(bytes: &[u8]) -> std::result::Result<IdxData, IdxError> {
    let magic = be_u32(bytes, 0)?;
    let ndims = match magic {
        IMAGES_MAGIC => 3,
        LABELS_MAGIC => 1,
        other => return Err(IdxError::BadMagic(other)),
    };
    let dims: Vec<u32> = (0..ndims).map(|i| be_u32(bytes, 4 + 4 * i)).collect::<std::result::Result<_, _>>()?;
    let header = 4 + 4 * ndims;
    let payload = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .and_then(|p| p.checked_add(header).map(|_| p))
        .ok_or_else(|| IdxError::DimOverflow(dims.clone()))?;
    let expected = header + payload;
    if bytes.len() < expected {
        return Err(IdxError::Truncated { expected, actual: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(IdxError::TrailingBytes(bytes.len() - expected));
    }
    let body = &bytes[header..];
    Ok(match ndims {
        1 => IdxData::Labels(body.to_vec()),
        _ => {
            let (count, rows, cols) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
            let data = body.iter().map(|&b| f64::from(b) / 255.0).collect();
            let pixels = Matrix::from_vec(count, rows * cols, data).expect("payload length checked");
            IdxData::Images { rows, cols, pixels }
        }
    })
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Inverse of the image branch of [`parse_idx`]; pixels are rounded back to `u8`.
pub fn encode_idx_images(pixels: &Matrix, rows: usize, cols: usize) -> Result<Vec<u8>> {
    if pixels.cols() != rows * cols {
        return invalid(format!("{} columns cannot be {rows}x{cols} images", pixels.cols()));
    }
    let mut out = Vec::with_capacity(16 + pixels.as_slice().len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for d in [pixels.rows(), rows, cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend(pixels.as_slice().iter().map(|&x| (x * 255.0).round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

/// Pairs an image file with a label file. `num_classes` defaults to `max label + 1`.
pub fn dataset_from_idx(images: IdxData, labels: IdxData, num_classes: Option<usize>) -> Result<Dataset> {
    let (IdxData::Images { pixels, .. }, IdxData::Labels(labels)) = (images, labels) else {
        return invalid("expected an image file and a label file");
    };
    if pixels.rows() != labels.len() {
        return invalid(format!("{} images but {} labels", pixels.rows(), labels.len()));
    }
    let labels: Vec<usize> = labels.into_iter().map(usize::from).collect();
    let k = num_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    let ids = (0..labels.len() as u64).collect();
    Dataset::new(pixels, labels, ids, k)
}
