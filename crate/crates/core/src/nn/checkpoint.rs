//! Model checkpoint container.
//!
//! Layout (little-endian): `"MLPC"`, version `u8`, layer count `u32`, then
//! `(in u32, out u32)` per layer, then per layer the row-major weights
//! followed by the bias, all as `f64`.

use std::fs;
use std::path::Path;

use crate::bytes::{put_f64, put_u32, Reader};
use crate::error::{malformed, Result};
use crate::numerics::Matrix;

use super::model::{Dense, MlpModel};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MLPC";
pub const CHECKPOINT_VERSION: u8 = 1;

pub fn encode_checkpoint(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * model.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    put_u32(&mut out, model.layers().len() as u32);
    for l in model.layers() {
        put_u32(&mut out, l.input_dim() as u32);
        put_u32(&mut out, l.output_dim() as u32);
    }
    for l in model.layers() {
        l.weight.as_slice().iter().for_each(|&w| put_f64(&mut out, w));
        l.bias.iter().for_each(|&b| put_f64(&mut out, b));
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<MlpModel> {
    const KIND: &str = "checkpoint";
    let mut r = Reader::new(bytes);
    let short = |s: crate::bytes::Short| crate::Error::Format {
        kind: KIND,
        msg: format!("truncated: needed {} bytes, {} available", s.needed, s.available),
    };
    if r.take(4).map_err(short)? != CHECKPOINT_MAGIC {
        return malformed(KIND, "bad magic");
    }
    let version = r.u8().map_err(short)?;
    if version != CHECKPOINT_VERSION {
        return malformed(KIND, format!("unsupported version {version}"));
    }
    let count = r.u32().map_err(short)? as usize;
    let mut dims = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        dims.push((r.u32().map_err(short)? as usize, r.u32().map_err(short)? as usize));
    }
    let mut layers = Vec::with_capacity(dims.len());
    for (input, output) in dims {
        let Some(n) = input.checked_mul(output).filter(|n| n.saturating_mul(8) <= r.remaining()) else {
            return malformed(KIND, format!("layer {input}x{output} exceeds the remaining payload"));
        };
        let mut w = Vec::with_capacity(n);
        for _ in 0..n {
            w.push(r.f64().map_err(short)?);
        }
        let mut b = Vec::with_capacity(output);
        for _ in 0..output {
            b.push(r.f64().map_err(short)?);
        }
        layers.push(Dense { weight: Matrix::from_vec(output, input, w)?, bias: b });
    }
    if r.remaining() != 0 {
        return malformed(KIND, format!("{} trailing bytes", r.remaining()));
    }
    MlpModel::from_layers(layers)
}

pub fn write_checkpoint(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<MlpModel> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn round_trip() {
        let mut rng = Rng::new(1);
        let m = MlpModel::new(&[4, 7, 3], &mut rng).unwrap();
        let bytes = encode_checkpoint(&m);
        assert_eq!(&bytes[..5], b"MLPC\x01");
        assert_eq!(decode_checkpoint(&bytes).unwrap(), m);
    }

    #[test]
    fn rejects_corruption() {
        let m = MlpModel::zeros(&[2, 2]).unwrap();
        let bytes = encode_checkpoint(&m);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
        let mut bad = bytes;
        bad[4] = 9;
        assert!(decode_checkpoint(&bad).is_err());
    }
}
