//! Dataset cache file.
//!
//! Layout (little-endian): `"SPLTDS"`, version `u8`, record count `u64`,
//! input dim `u32`, class count `u32`, then per record: id `u64`, label
//! `u32`, inputs `f64 x dim`.

use std::fs;
use std::path::Path;

use crate::bytes::{put_f64, put_u32, put_u64, Reader, Short};
use crate::error::{malformed, Error, Result};
use crate::numerics::Matrix;

use super::Dataset;

pub const DATASET_MAGIC: &[u8; 6] = b"SPLTDS";
pub const DATASET_VERSION: u8 = 1;

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(23 + ds.len() * (12 + 8 * ds.dim()));
    out.extend_from_slice(DATASET_MAGIC);
    out.push(DATASET_VERSION);
    put_u64(&mut out, ds.len() as u64);
    put_u32(&mut out, ds.dim() as u32);
    put_u32(&mut out, ds.num_classes() as u32);
    for (i, row) in ds.inputs().iter_rows().enumerate() {
        put_u64(&mut out, ds.ids()[i]);
        put_u32(&mut out, ds.labels()[i] as u32);
        row.iter().for_each(|&x| put_f64(&mut out, x));
    }
    out
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    const KIND: &str = "dataset";
    let short = |s: Short| Error::Format {
        kind: KIND,
        msg: format!("truncated: needed {} bytes, {} available", s.needed, s.available),
    };
    let mut r = Reader::new(bytes);
    if r.take(6).map_err(short)? != DATASET_MAGIC {
        return malformed(KIND, "bad magic");
    }
    let version = r.u8().map_err(short)?;
    if version != DATASET_VERSION {
        return malformed(KIND, format!("unsupported version {version}"));
    }
    let n = r.u64().map_err(short)? as usize;
    let d = r.u32().map_err(short)? as usize;
    let k = r.u32().map_err(short)? as usize;
    let record = 12 + 8 * d;
    if n.checked_mul(record) != Some(r.remaining()) {
        return malformed(KIND, format!("{n} records of {record} bytes do not fit {} payload bytes", r.remaining()));
    }
    let mut inputs = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        ids.push(r.u64().map_err(short)?);
        labels.push(r.u32().map_err(short)? as usize);
        for x in inputs.row_mut(i) {
            *x = r.f64().map_err(short)?;
        }
    }
    Dataset::new(inputs, labels, ids, k)
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_dataset(ds))?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_dataset(&fs::read(path)?)
}
