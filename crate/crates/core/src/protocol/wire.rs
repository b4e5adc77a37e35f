//! Wire messages.
//!
//! Every message starts with `"SPLT"`, version `u8` (= 1) and a type `u8`.
//! All integers and floats are little-endian.
//!
//! | type | body |
//! |------|------|
//! | 1 `ForwardBatch`  | batch_id `u64`, n `u32`, d `u32`, ids `u64 x n`, z `f32 x n·d` |
//! | 2 `BackwardBatch` | batch_id `u64`, n `u32`, d `u32`, grads `f32 x n·d` |
//! | 3 `EndEpoch`      | epoch `u32` |

use std::io::{self, Read};

use thiserror::Error;

use crate::bytes::{put_f32, put_u32, put_u64, Reader, Short};
use crate::numerics::Matrix;

pub const WIRE_MAGIC: &[u8; 4] = b"SPLT";
pub const WIRE_VERSION: u8 = 1;

const TYPE_FORWARD: u8 = 1;
const TYPE_BACKWARD: u8 = 2;
const TYPE_END_EPOCH: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported wire version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("truncated message: needed {needed} more bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
    #[error("batch shape {rows}x{cols} overflows")]
    ShapeOverflow { rows: u32, cols: u32 },
}

impl From<Short> for DecodeError {
    fn from(s: Short) -> Self {
        DecodeError::Truncated { needed: s.needed, available: s.available }
    }
}

/// Row-major `f32` matrix as carried on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct F32Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl F32Matrix {
    /// Rounds each entry to the nearest `f32`.
    pub fn quantize(m: &Matrix) -> Self {
        Self { rows: m.rows(), cols: m.cols(), data: m.as_slice().iter().map(|&x| x as f32).collect() }
    }

    pub fn to_f64(&self) -> Matrix {
        Matrix::from_vec(self.rows, self.cols, self.data.iter().map(|&x| f64::from(x)).collect())
            .expect("shape is consistent by construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage {
    ForwardBatch { batch_id: u64, ids: Vec<u64>, z: F32Matrix },
    BackwardBatch { batch_id: u64, grads: F32Matrix },
    EndEpoch { epoch: u32 },
}

pub fn encode_message(msg: &WireMessage) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(WIRE_MAGIC);
    out.push(WIRE_VERSION);
    match msg {
        WireMessage::ForwardBatch { batch_id, ids, z } => {
            debug_assert_eq!(ids.len(), z.rows);
            out.push(TYPE_FORWARD);
            put_u64(&mut out, *batch_id);
            put_u32(&mut out, z.rows as u32);
            put_u32(&mut out, z.cols as u32);
            ids.iter().for_each(|&id| put_u64(&mut out, id));
            z.data.iter().for_each(|&x| put_f32(&mut out, x));
        }
        WireMessage::BackwardBatch { batch_id, grads } => {
            out.push(TYPE_BACKWARD);
            put_u64(&mut out, *batch_id);
            put_u32(&mut out, grads.rows as u32);
            put_u32(&mut out, grads.cols as u32);
            grads.data.iter().for_each(|&x| put_f32(&mut out, x));
        }
        WireMessage::EndEpoch { epoch } => {
            out.push(TYPE_END_EPOCH);
            put_u32(&mut out, *epoch);
        }
    }
    out
}

fn read_f32s(r: &mut Reader<'_>, count: usize) -> Result<Vec<f32>, DecodeError> {
    let raw = r.take(count.checked_mul(4).ok_or(DecodeError::Truncated { needed: usize::MAX, available: r.remaining() })?)?;
    Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
}

fn shape(r: &mut Reader<'_>) -> Result<(usize, usize, usize), DecodeError> {
    let rows = r.u32()?;
    let cols = r.u32()?;
    let count = (rows as usize)
        .checked_mul(cols as usize)
        .ok_or(DecodeError::ShapeOverflow { rows, cols })?;
    Ok((rows as usize, cols as usize, count))
}

pub fn decode_message(bytes: &[u8]) -> Result<WireMessage, DecodeError> {
    let mut r = Reader::new(bytes);
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if &magic != WIRE_MAGIC {
        return Err(DecodeError::BadMagic(magic));
    }
    let version = r.u8()?;
    if version != WIRE_VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let msg = match r.u8()? {
        TYPE_FORWARD => {
            let batch_id = r.u64()?;
            let (rows, cols, count) = shape(&mut r)?;
            let id_bytes = r.take(rows.checked_mul(8).ok_or(DecodeError::ShapeOverflow { rows: rows as u32, cols: cols as u32 })?)?;
            let ids = id_bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
            let data = read_f32s(&mut r, count)?;
            WireMessage::ForwardBatch { batch_id, ids, z: F32Matrix { rows, cols, data } }
        }
        TYPE_BACKWARD => {
            let batch_id = r.u64()?;
            let (rows, cols, count) = shape(&mut r)?;
            let data = read_f32s(&mut r, count)?;
            WireMessage::BackwardBatch { batch_id, grads: F32Matrix { rows, cols, data } }
        }
        TYPE_END_EPOCH => WireMessage::EndEpoch { epoch: r.u32()? },
        other => return Err(DecodeError::UnknownType(other)),
    };
    if r.remaining() != 0 {
        return Err(DecodeError::TrailingBytes(r.remaining()));
    }
    Ok(msg)
}

/// Reads one message from a byte stream. Returns `Ok(None)` on a clean EOF
/// before the first header byte.
pub fn read_message<R: Read>(stream: &mut R) -> io::Result<Option<Result<WireMessage, DecodeError>>> {
    let mut buf = vec![0u8; 6];
    let first = loop {
        match stream.read(&mut buf[..1]) {
            Ok(n) => break n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    };
    if first == 0 {
        return Ok(None);
    }
    stream.read_exact(&mut buf[1..6])?;
    let body_prefix = match buf[5] {
        TYPE_FORWARD | TYPE_BACKWARD => 16,
        TYPE_END_EPOCH => 4,
        _ => 0,
    };
    if &buf[..4] != WIRE_MAGIC || buf[4] != WIRE_VERSION || body_prefix == 0 {
        // let the decoder name the problem
        return Ok(Some(decode_message(&buf)));
    }
    let mut prefix = vec![0u8; body_prefix];
    stream.read_exact(&mut prefix)?;
    buf.extend_from_slice(&prefix);
    if buf[5] != TYPE_END_EPOCH {
        let rows = u32::from_le_bytes(prefix[8..12].try_into().unwrap()) as u64;
        let cols = u32::from_le_bytes(prefix[12..16].try_into().unwrap()) as u64;
        let id_bytes = if buf[5] == TYPE_FORWARD { rows * 8 } else { 0 };
        let payload = id_bytes + rows * cols * 4;
        let mut rest = Vec::new();
        let got = stream.take(payload).read_to_end(&mut rest)?;
        if (got as u64) < payload {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "stream ended inside a message"));
        }
        buf.extend_from_slice(&rest);
    }
    Ok(Some(decode_message(&buf)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    #[test]
    fn golden_forward_batch() {
        let msg = WireMessage::ForwardBatch { batch_id: 0, ids: vec![7], z: F32Matrix { rows: 1, cols: 1, data: vec![1.5] } };
        let expect: Vec<u8> = vec![
            b'S', b'P', b'L', b'T', 0x01, 0x01, // header
            0, 0, 0, 0, 0, 0, 0, 0, // batch id
            1, 0, 0, 0, // n
            1, 0, 0, 0, // d
            7, 0, 0, 0, 0, 0, 0, 0, // id
            0x00, 0x00, 0xc0, 0x3f, // 1.5f32
        ];
        assert_eq!(encode_message(&msg), expect);
        assert_eq!(decode_message(&expect).unwrap(), msg);
    }

    #[test]
    fn empty_batch_round_trips() {
        let msg = WireMessage::ForwardBatch { batch_id: 3, ids: vec![], z: F32Matrix { rows: 0, cols: 8, data: vec![] } };
        assert_eq!(decode_message(&encode_message(&msg)).unwrap(), msg);
    }

    #[test]
    fn distinct_decode_errors() {
        let good = encode_message(&WireMessage::EndEpoch { epoch: 2 });
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_message(&bad), Err(DecodeError::BadMagic(_))));
        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(decode_message(&bad), Err(DecodeError::UnsupportedVersion(2)));
        let mut bad = good.clone();
        bad[5] = 9;
        assert_eq!(decode_message(&bad), Err(DecodeError::UnknownType(9)));
        assert!(matches!(decode_message(&good[..good.len() - 1]), Err(DecodeError::Truncated { .. })));
        let mut long = good;
        long.push(0);
        assert_eq!(decode_message(&long), Err(DecodeError::TrailingBytes(1)));
    }

    #[test]
    fn stream_reader_matches_decoder() {
        let mut rng = Rng::new(1);
        let msgs = vec![
            WireMessage::ForwardBatch {
                batch_id: 1,
                ids: vec![4, 5],
                z: F32Matrix { rows: 2, cols: 3, data: (0..6).map(|_| rng.standard_normal() as f32).collect() },
            },
            WireMessage::BackwardBatch { batch_id: 1, grads: F32Matrix { rows: 2, cols: 3, data: vec![0.25; 6] } },
            WireMessage::EndEpoch { epoch: 0 },
        ];
        let bytes: Vec<u8> = msgs.iter().flat_map(encode_message).collect();
        let mut cursor = std::io::Cursor::new(bytes);
        for m in &msgs {
            assert_eq!(&read_message(&mut cursor).unwrap().unwrap().unwrap(), m);
        }
        assert!(read_message(&mut cursor).unwrap().is_none());
    }

    fn arb_matrix() -> impl Strategy<Value = F32Matrix> {
        (0usize..5, 0usize..5).prop_flat_map(|(rows, cols)| {
            prop::collection::vec(any::<u32>().prop_map(f32::from_bits), rows * cols)
                .prop_map(move |data| F32Matrix { rows, cols, data })
        })
    }

    pub(crate) fn arb_message() -> impl Strategy<Value = WireMessage> {
        prop_oneof![
            (any::<u64>(), arb_matrix()).prop_flat_map(|(batch_id, z)| {
                prop::collection::vec(any::<u64>(), z.rows)
                    .prop_map(move |ids| WireMessage::ForwardBatch { batch_id, ids, z: z.clone() })
            }),
            (any::<u64>(), arb_matrix()).prop_map(|(batch_id, grads)| WireMessage::BackwardBatch { batch_id, grads }),
            any::<u32>().prop_map(|epoch| WireMessage::EndEpoch { epoch }),
        ]
    }

    proptest! {
        #[test]
        fn codec_round_trip_is_bit_exact(msg in arb_message()) {
            let bytes = encode_message(&msg);
            let back = decode_message(&bytes).unwrap();
            // bytes pin every f32 bit pattern, NaN payloads included
            prop_assert_eq!(encode_message(&back), bytes);
        }
    }
}
