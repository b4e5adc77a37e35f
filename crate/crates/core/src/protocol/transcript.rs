//! The attacker's record of every `(id, z, ∇z L)` exchange.
//!
//! File layout (little-endian): `"SPLTTR"`, version `u8`, embedding dim
//! `u32`, epochs `u32`, batch size `u32`, noise flag `u8` followed by sigma
//! `f64` (zero when the flag is clear), record count `u64`, then per record:
//! id `u64`, epoch `u32`, z `f32 x dim`, grad `f32 x dim`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bytes::{put_f32, put_f64, put_u32, put_u64, Reader, Short};
use crate::error::{invalid, malformed, Error, Result};
use crate::numerics::Matrix;

pub const TRANSCRIPT_MAGIC: &[u8; 6] = b"SPLTTR";
pub const TRANSCRIPT_VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TranscriptRecord {
    pub input_id: u64,
    pub epoch: u32,
    pub z: Vec<f64>,
    pub grad_z: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptMeta {
    pub embedding_dim: usize,
    pub num_epochs: u32,
    pub batch_size: u32,
    /// Noise standard deviation applied by the label owner; `None` when the
    /// gradients were sent clean (sigma 0 is recorded as `None`).
    pub noise_sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub meta: TranscriptMeta,
    records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn new(meta: TranscriptMeta) -> Self {
        Self { meta, records: Vec::new() }
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: TranscriptRecord) -> Result<()> {
        let d = self.meta.embedding_dim;
        if record.z.len() != d || record.grad_z.len() != d {
            return invalid(format!(
                "record {} has z/grad lengths {}/{}, transcript dim is {d}",
                record.input_id,
                record.z.len(),
                record.grad_z.len()
            ));
        }
        self.records.push(record);
        Ok(())
    }

    /// Epochs present, in ascending order.
    pub fn epochs(&self) -> Vec<u32> {
        let mut e: Vec<u32> = self.records.iter().map(|r| r.epoch).collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn last_epoch(&self) -> Option<u32> {
        self.records.iter().map(|r| r.epoch).max()
    }

    pub fn epoch_records(&self, epoch: u32) -> Vec<&TranscriptRecord> {
        self.records.iter().filter(|r| r.epoch == epoch).collect()
    }

    /// `(ids, z, grads)` for one epoch, in recorded order.
    pub fn epoch_matrices(&self, epoch: u32) -> (Vec<u64>, Matrix, Matrix) {
        let recs = self.epoch_records(epoch);
        let d = self.meta.embedding_dim;
        let mut z = Matrix::zeros(recs.len(), d);
        let mut g = Matrix::zeros(recs.len(), d);
        for (i, r) in recs.iter().enumerate() {
            z.row_mut(i).copy_from_slice(&r.z);
            g.row_mut(i).copy_from_slice(&r.grad_z);
        }
        (recs.iter().map(|r| r.input_id).collect(), z, g)
    }

    /// Checks that every id appears at most once per epoch.
    pub fn validate(&self) -> Result<()> {
        let mut seen: HashSet<(u32, u64)> = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            if !seen.insert((r.epoch, r.input_id)) {
                return invalid(format!("id {} appears twice in epoch {}", r.input_id, r.epoch));
            }
        }
        Ok(())
    }
}

pub fn encode_transcript(t: &Transcript) -> Vec<u8> {
    let d = t.meta.embedding_dim;
    let mut out = Vec::with_capacity(40 + t.len() * (12 + 8 * d));
    out.extend_from_slice(TRANSCRIPT_MAGIC);
    out.push(TRANSCRIPT_VERSION);
    put_u32(&mut out, d as u32);
    put_u32(&mut out, t.meta.num_epochs);
    put_u32(&mut out, t.meta.batch_size);
    out.push(u8::from(t.meta.noise_sigma.is_some()));
    put_f64(&mut out, t.meta.noise_sigma.unwrap_or(0.0));
    put_u64(&mut out, t.len() as u64);
    for r in &t.records {
        put_u64(&mut out, r.input_id);
        put_u32(&mut out, r.epoch);
        r.z.iter().for_each(|&x| put_f32(&mut out, x as f32));
        r.grad_z.iter().for_each(|&x| put_f32(&mut out, x as f32));
    }
    out
}

pub fn decode_transcript(bytes: &[u8]) -> Result<Transcript> {
    const KIND: &str = "transcript";
    let short = |s: Short| Error::Format {
        kind: KIND,
        msg: format!("truncated: needed {} bytes, {} available", s.needed, s.available),
    };
    let mut r = Reader::new(bytes);
    if r.take(6).map_err(short)? != TRANSCRIPT_MAGIC {
        return malformed(KIND, "bad magic");
    }
    let version = r.u8().map_err(short)?;
    if version != TRANSCRIPT_VERSION {
        return malformed(KIND, format!("unsupported version {version}"));
    }
    let d = r.u32().map_err(short)? as usize;
    let num_epochs = r.u32().map_err(short)?;
    let batch_size = r.u32().map_err(short)?;
    let has_sigma = r.u8().map_err(short)?;
    let sigma = r.f64().map_err(short)?;
    let noise_sigma = match has_sigma {
        0 => None,
        1 => Some(sigma),
        other => return malformed(KIND, format!("bad noise flag {other}")),
    };
    let n = r.u64().map_err(short)? as usize;
    let record = 12 + 8 * d;
    if n.checked_mul(record) != Some(r.remaining()) {
        return malformed(KIND, format!("{n} records of {record} bytes do not fit {} payload bytes", r.remaining()));
    }
    let mut t = Transcript::new(TranscriptMeta { embedding_dim: d, num_epochs, batch_size, noise_sigma });
    t.records.reserve(n);
    for _ in 0..n {
        let input_id = r.u64().map_err(short)?;
        let epoch = r.u32().map_err(short)?;
        let mut z = Vec::with_capacity(d);
        let mut grad_z = Vec::with_capacity(d);
        for _ in 0..d {
            z.push(f64::from(r.f32().map_err(short)?));
        }
        for _ in 0..d {
            grad_z.push(f64::from(r.f32().map_err(short)?));
        }
        t.records.push(TranscriptRecord { input_id, epoch, z, grad_z });
    }
    Ok(t)
}

pub fn write_transcript(t: &Transcript, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_transcript(t))?;
    Ok(())
}

pub fn read_transcript(path: impl AsRef<Path>) -> Result<Transcript> {
    decode_transcript(&fs::read(path)?)
}
