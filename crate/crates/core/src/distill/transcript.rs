//! Audit dump of everything placed on the public channel.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "CVQKDTR1"
//! record*  frame_id u64 | direction u8 | kind u8 | slice u8 | reserved u8
//!          | len u32 | payload[len]
//! ```
//!
//! `direction` is 0 for Alice → Bob and 1 for Bob → Alice. `slice` is the
//! 1-based slice index, or 0 for records not tied to a slice. Payloads:
//!
//! * `SBAR` (1): `count u32`, then `count` IEEE-754 `f64` values.
//! * `SYNDROME` (2) and `VERIFY` (3): `nbits u32`, then the bits packed
//!   least significant first into `⌈nbits/8⌉` bytes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::distill::hash::{pack_bytes, unpack_bytes};
use crate::error::{Error, Result};

pub const TRANSCRIPT_MAGIC: &[u8; 8] = b"CVQKDTR1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum Direction {
    AliceToBob = 0,
    BobToAlice = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum PayloadKind {
    Sbar = 1,
    Syndrome = 2,
    Verify = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Sbar(Vec<f64>),
    Bits(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub frame_id: u64,
    pub direction: Direction,
    pub kind: PayloadKind,
    pub slice: u8,
    pub payload: Payload,
}

impl Record {
    pub fn sbar(frame_id: u64, values: Vec<f64>) -> Self {
        Record {
            frame_id,
            direction: Direction::AliceToBob,
            kind: PayloadKind::Sbar,
            slice: 0,
            payload: Payload::Sbar(values),
        }
    }

    pub fn bits(frame_id: u64, kind: PayloadKind, slice: u8, bits: Vec<u8>) -> Self {
        Record {
            frame_id,
            direction: Direction::AliceToBob,
            kind,
            slice,
            payload: Payload::Bits(bits),
        }
    }

    /// Bits this record discloses about the key material; `S̄` is
    /// independent of the slice bits and does not count.
    pub fn leaked_bits(&self) -> usize {
        match (&self.kind, &self.payload) {
            (PayloadKind::Syndrome | PayloadKind::Verify, Payload::Bits(b)) => b.len(),
            _ => 0,
        }
    }

    fn encode_payload(&self) -> Vec<u8> {
        match &self.payload {
            Payload::Sbar(v) => {
                let mut out = Vec::with_capacity(4 + 8 * v.len());
                out.extend_from_slice(&(v.len() as u32).to_le_bytes());
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
                out
            }
            Payload::Bits(b) => {
                let mut out = (b.len() as u32).to_le_bytes().to_vec();
                out.extend(pack_bytes(b));
                out
            }
        }
    }
}

pub fn write_record<W: Write>(out: &mut W, r: &Record) -> Result<()> {
    let payload = r.encode_payload();
    out.write_all(&r.frame_id.to_le_bytes())?;
    out.write_all(&[r.direction as u8, r.kind as u8, r.slice, 0])?;
    out.write_all(&(payload.len() as u32).to_le_bytes())?;
    out.write_all(&payload)?;
    Ok(())
}

pub fn write_transcript<W: Write>(mut out: W, records: &[Record]) -> Result<()> {
    out.write_all(TRANSCRIPT_MAGIC)?;
    for r in records {
        write_record(&mut out, r)?;
    }
    out.flush()?;
    Ok(())
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::Transcript(msg.into())
}

pub fn read_transcript<R: Read>(mut input: R) -> Result<Vec<Record>> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    if data.len() < 8 || &data[..8] != TRANSCRIPT_MAGIC {
        return Err(malformed("missing magic header"));
    }
    let mut pos = 8;
    let mut records = Vec::new();
    while pos < data.len() {
        if data.len() - pos < 16 {
            return Err(malformed(format!("truncated record header at byte {pos}")));
        }
        let h = &data[pos..pos + 16];
        let frame_id = u64::from_le_bytes(h[0..8].try_into().unwrap());
        let direction = match h[8] {
            0 => Direction::AliceToBob,
            1 => Direction::BobToAlice,
            d => return Err(malformed(format!("unknown direction {d} at byte {pos}"))),
        };
        let kind = match h[9] {
            1 => PayloadKind::Sbar,
            2 => PayloadKind::Syndrome,
            3 => PayloadKind::Verify,
            k => return Err(malformed(format!("unknown payload kind {k} at byte {pos}"))),
        };
        let slice = h[10];
        let len = u32::from_le_bytes(h[12..16].try_into().unwrap()) as usize;
        pos += 16;
        if data.len() - pos < len {
            return Err(malformed(format!(
                "payload of {len} bytes overruns the file"
            )));
        }
        let body = &data[pos..pos + len];
        pos += len;
        if body.len() < 4 {
            return Err(malformed("payload shorter than its count field"));
        }
        let count = u32::from_le_bytes(body[0..4].try_into().unwrap()) as usize;
        let rest = &body[4..];
        let payload = match kind {
            PayloadKind::Sbar => {
                if rest.len() != 8 * count {
                    return Err(malformed("S̄ payload length does not match its count"));
                }
                Payload::Sbar(
                    rest.chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                )
            }
            _ => {
                if rest.len() != count.div_ceil(8) {
                    return Err(malformed("bit payload length does not match its count"));
                }
                Payload::Bits(unpack_bytes(rest, count))
            }
        };
        records.push(Record {
            frame_id,
            direction,
            kind,
            slice,
            payload,
        });
    }
    Ok(records)
}

/// Leakage totals recomputed from a transcript.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptTotals {
    pub records: usize,
    pub frames: usize,
    pub syndrome_bits: usize,
    pub verification_bits: usize,
    pub sbar_values: usize,
}

pub fn transcript_totals(records: &[Record]) -> TranscriptTotals {
    let mut t = TranscriptTotals {
        records: records.len(),
        ..Default::default()
    };
    let mut frames: Vec<u64> = records.iter().map(|r| r.frame_id).collect();
    frames.sort_unstable();
    frames.dedup();
    t.frames = frames.len();
    for r in records {
        match (&r.kind, &r.payload) {
            (PayloadKind::Syndrome, Payload::Bits(b)) => t.syndrome_bits += b.len(),
            (PayloadKind::Verify, Payload::Bits(b)) => t.verification_bits += b.len(),
            (PayloadKind::Sbar, Payload::Sbar(v)) => t.sbar_values += v.len(),
            _ => {}
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Record> {
        vec![
            Record::sbar(0, vec![0.25, 0.5, 1.0 / 3.0]),
            Record::bits(0, PayloadKind::Syndrome, 1, vec![1, 0, 1, 1, 0, 0, 0, 1, 1]),
            Record::bits(0, PayloadKind::Verify, 1, vec![0; 32]),
            Record::bits(7, PayloadKind::Syndrome, 2, vec![]),
        ]
    }

    #[test]
    fn roundtrip() {
        let mut buf = Vec::new();
        write_transcript(&mut buf, &sample()).unwrap();
        assert_eq!(&buf[..8], TRANSCRIPT_MAGIC);
        assert_eq!(read_transcript(&buf[..]).unwrap(), sample());
        let t = transcript_totals(&sample());
        assert_eq!(t.syndrome_bits, 9);
        assert_eq!(t.verification_bits, 32);
        assert_eq!(t.sbar_values, 3);
        assert_eq!(t.frames, 2);
    }

    #[test]
    fn byte_layout() {
        let mut buf = Vec::new();
        write_transcript(
            &mut buf,
            &[Record::bits(258, PayloadKind::Syndrome, 2, vec![1, 1, 0])],
        )
        .unwrap();
        assert_eq!(
            buf[8..],
            [2, 1, 0, 0, 0, 0, 0, 0, 0, 2, 2, 0, 5, 0, 0, 0, 3, 0, 0, 0, 0b011]
        );
    }

    #[test]
    fn rejects_corruption() {
        let mut buf = Vec::new();
        write_transcript(&mut buf, &sample()).unwrap();
        assert!(read_transcript(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_transcript(&bad[..]).is_err());
        let mut bad = buf.clone();
        bad[8 + 9] = 9;
        assert!(read_transcript(&bad[..]).is_err());
    }
}
