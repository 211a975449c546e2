use crate::error::{Error, Result};
use crate::mathcore::RandomStream;

/// Packs 0/1 bytes into little-endian `u64` words (bit `k` of word `k/64`).
pub fn pack_bits(bits: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (k, &b) in bits.iter().enumerate() {
        words[k / 64] |= ((b & 1) as u64) << (k % 64);
    }
    words
}

pub fn unpack_bits(words: &[u64], len: usize) -> Vec<u8> {
    (0..len)
        .map(|k| ((words[k / 64] >> (k % 64)) & 1) as u8)
        .collect()
}

/// Packs bits into bytes, least significant bit first.
pub fn pack_bytes(bits: &[u8]) -> Vec<u8> {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (k, &b) in bits.iter().enumerate() {
        bytes[k / 8] |= (b & 1) << (k % 8);
    }
    bytes
}

pub fn unpack_bytes(bytes: &[u8], len: usize) -> Vec<u8> {
    (0..len).map(|k| (bytes[k / 8] >> (k % 8)) & 1).collect()
}

/// Toeplitz matrix over GF(2) of shape `output_len × input_len`, fixed by
/// `input_len + output_len - 1` random bits: `T[i][j] = r[i + n - 1 - j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzHash {
    input_len: usize,
    output_len: usize,
    seed: Vec<u64>,
}

impl ToeplitzHash {
    pub fn from_stream(input_len: usize, output_len: usize, stream: &RandomStream) -> Self {
        let nbits = (input_len + output_len).saturating_sub(1);
        let mut rng = stream.clone();
        let mut seed: Vec<u64> = (0..nbits.div_ceil(64)).map(|_| rng.next_u64()).collect();
        if !nbits.is_multiple_of(64) {
            if let Some(last) = seed.last_mut() {
                *last &= (1u64 << (nbits % 64)) - 1;
            }
        }
        // One spare zero word so windows can always read a following word.
        seed.push(0);
        ToeplitzHash {
            input_len,
            output_len,
            seed,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    /// `T · bits`.
    pub fn apply(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.len() != self.input_len {
            return Err(Error::LengthMismatch {
                expected: self.input_len,
                found: bits.len(),
            });
        }
        let out_words = self.output_len.div_ceil(64);
        let mut acc = vec![0u64; out_words];
        if self.output_len == 0 {
            return Ok(Vec::new());
        }
        // Column j of T is the window r[n-1-j .. n-1-j+ℓ].
        for (j, _) in bits.iter().enumerate().filter(|(_, &b)| b & 1 == 1) {
            let start = self.input_len - 1 - j;
            let (w0, sh) = (start / 64, start % 64);
            if sh == 0 {
                for (k, a) in acc.iter_mut().enumerate() {
                    *a ^= self.seed[w0 + k];
                }
            } else {
                for (k, a) in acc.iter_mut().enumerate() {
                    *a ^= (self.seed[w0 + k] >> sh) | (self.seed[w0 + k + 1] << (64 - sh));
                }
            }
        }
        Ok(unpack_bits(&acc, self.output_len))
    }

    /// Entry `T[i][j]`, for tests.
    pub fn entry(&self, i: usize, j: usize) -> u8 {
        let k = i + self.input_len - 1 - j;
        ((self.seed[k / 64] >> (k % 64)) & 1) as u8
    }
}

/// Random parity checks used to confirm that two strings agree.
#[derive(Debug, Clone)]
pub struct ParityVerifier {
    masks: Vec<Vec<u64>>,
    len: usize,
}

impl ParityVerifier {
    pub fn new(len: usize, count: usize, stream: &RandomStream) -> Self {
        let mut rng = stream.clone();
        let words = len.div_ceil(64);
        let tail = len % 64;
        let masks = (0..count)
            .map(|_| {
                let mut m: Vec<u64> = (0..words).map(|_| rng.next_u64()).collect();
                if tail != 0 {
                    m[words - 1] &= (1u64 << tail) - 1;
                }
                m
            })
            .collect();
        ParityVerifier { masks, len }
    }

    pub fn count(&self) -> usize {
        self.masks.len()
    }

    pub fn parities(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                found: bits.len(),
            });
        }
        let packed = pack_bits(bits);
        Ok(self
            .masks
            .iter()
            .map(|m| {
                (m.iter()
                    .zip(&packed)
                    .map(|(a, b)| (a & b).count_ones())
                    .sum::<u32>()
                    & 1) as u8
            })
            .collect())
    }
}
