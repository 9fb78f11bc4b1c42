//! Packed, length-tagged bit sequences — the universal currency between the
//! device model, the PUF layer, the TRNG pipelines, and the test suite.
//!
//! Bit `i` lives in word `i / 64` at position `i % 64` (LSB-first), and byte
//! serialization follows the same order: bit `i` is bit `i % 8` of byte
//! `i / 8`. Canonical form keeps every bit beyond `len` zero, so equality is
//! plain `(len, words)` equality.

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitVector[{} bits", self.len)?;
        if self.len <= 64 {
            write!(f, " {}", self.to_ascii())?;
        }
        write!(f, "]")
    }
}

impl BitVector {
    pub fn new() -> Self {
        BitVector {
            len: 0,
            words: Vec::new(),
        }
    }

    /// All-zero vector of the given length.
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    /// All-one vector of the given length (canonicalized).
    pub fn ones(len: usize) -> Self {
        let mut v = BitVector {
            len,
            words: vec![u64::MAX; len.div_ceil(64)],
        };
        v.canonicalize();
        v
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitVector {
            len: 0,
            words: Vec::with_capacity(bits.div_ceil(64)),
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = BitVector::with_capacity(bits.len());
        for &b in bits {
            v.push(b);
        }
        v
    }

    /// Parses a string of '0'/'1' characters; whitespace is ignored.
    pub fn from_ascii(s: &str) -> Result<Self> {
        let mut v = BitVector::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => v.push(false),
                '1' => v.push(true),
                c if c.is_whitespace() => {}
                c => {
                    return Err(Error::Malformed(format!(
                        "unexpected character {c:?} in bit string"
                    )))
                }
            }
        }
        Ok(v)
    }

    pub fn to_ascii(&self) -> String {
        (0..self.len)
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    /// The 64-bit word holding bits [i, i+64); `i` must be 64-aligned.
    /// Bit `i + j` is `(word >> j) & 1`.
    #[inline]
    pub fn word_at(&self, i: usize) -> u64 {
        debug_assert!(i.is_multiple_of(64) && i < self.len);
        self.words[i >> 6]
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i & 63);
        if value {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn push(&mut self, value: bool) {
        if self.len & 63 == 0 {
            self.words.push(0);
        }
        if value {
            let i = self.len;
            self.words[i >> 6] |= 1u64 << (i & 63);
        }
        self.len += 1;
    }

    /// Appends all bits of `other`.
    pub fn extend_from(&mut self, other: &BitVector) {
        if self.len & 63 == 0 {
            // word-aligned fast path
            self.words.extend_from_slice(&other.words);
            self.words.truncate((self.len + other.len).div_ceil(64));
            self.len += other.len;
        } else {
            for i in 0..other.len {
                self.push(other.get(i));
            }
        }
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones_fraction(&self) -> f64 {
        if self.len == 0 {
            return 0.0;
        }
        self.popcount() as f64 / self.len as f64
    }

    pub fn xor(&self, other: &BitVector) -> Result<BitVector> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(BitVector {
            len: self.len,
            words,
        })
    }

    /// Number of differing bits.
    pub fn hamming_distance(&self, other: &BitVector) -> Result<usize> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Hamming distance normalized by length, in [0, 1].
    pub fn fractional_hd(&self, other: &BitVector) -> Result<f64> {
        if self.len == 0 {
            return Ok(0.0);
        }
        Ok(self.hamming_distance(other)? as f64 / self.len as f64)
    }

    /// Copy of bits [start, end).
    pub fn slice(&self, start: usize, end: usize) -> BitVector {
        assert!(start <= end && end <= self.len, "slice out of range");
        let mut out = BitVector::with_capacity(end - start);
        if start & 63 == 0 {
            let n = end - start;
            let w0 = start >> 6;
            out.words
                .extend_from_slice(&self.words[w0..w0 + n.div_ceil(64)]);
            out.len = n;
            out.canonicalize();
        } else {
            for i in start..end {
                out.push(self.get(i));
            }
        }
        out
    }

    /// First `n` bits.
    pub fn truncated(&self, n: usize) -> BitVector {
        self.slice(0, n.min(self.len))
    }

    /// Bits at the given (strictly increasing) indices, in order.
    pub fn select(&self, indices: &[usize]) -> BitVector {
        let mut out = BitVector::with_capacity(indices.len());
        for &i in indices {
            out.push(self.get(i));
        }
        out
    }

    /// Serializes as an 8-byte little-endian bit-length header followed by the
    /// packed payload (LSB-first within each byte).
    pub fn to_packed_bytes(&self) -> Vec<u8> {
        let n_bytes = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(8 + n_bytes);
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(8 + n_bytes);
        out
    }

    pub fn from_packed_bytes(data: &[u8]) -> Result<BitVector> {
        if data.len() < 8 {
            return Err(Error::Malformed(
                "packed bitstream shorter than its 8-byte header".into(),
            ));
        }
        let len = u64::from_le_bytes(data[..8].try_into().unwrap()) as usize;
        let n_bytes = len.div_ceil(8);
        let payload = &data[8..];
        if payload.len() != n_bytes {
            return Err(Error::Malformed(format!(
                "packed bitstream payload is {} bytes, expected {} for {} bits",
                payload.len(),
                n_bytes,
                len
            )));
        }
        let mut words = vec![0u64; len.div_ceil(64)];
        for (i, b) in payload.iter().enumerate() {
            words[i / 8] |= (*b as u64) << ((i % 8) * 8);
        }
        let mut v = BitVector { len, words };
        v.canonicalize();
        Ok(v)
    }

    /// Payload bytes only (no header), e.g. for hex display of fingerprints.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_packed_bytes()[8..].to_vec()
    }

    pub fn from_bytes(payload: &[u8], len: usize) -> Result<BitVector> {
        if payload.len() != len.div_ceil(8) {
            return Err(Error::Malformed(format!(
                "payload of {} bytes cannot hold exactly {} bits",
                payload.len(),
                len
            )));
        }
        let mut data = Vec::with_capacity(8 + payload.len());
        data.extend_from_slice(&(len as u64).to_le_bytes());
        data.extend_from_slice(payload);
        BitVector::from_packed_bytes(&data)
    }

    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<BitVector> {
        if !hex.len().is_multiple_of(2) {
            return Err(Error::Malformed("odd-length hex string".into()));
        }
        let bytes: Result<Vec<u8>> = (0..hex.len() / 2)
            .map(|i| {
                u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                    .map_err(|e| Error::Malformed(format!("bad hex byte: {e}")))
            })
            .collect();
        BitVector::from_bytes(&bytes?, len)
    }

    /// Renders a binary PGM (P5, maxval 255) bitmap with `row_width` bits per
    /// row: 0 bits white (255), 1 bits black (0). A final partial row is
    /// padded white.
    pub fn to_pgm(&self, row_width: usize) -> Result<Vec<u8>> {
        if row_width == 0 {
            return Err(Error::InvalidArgument("bitmap row width must be >= 1".into()));
        }
        let rows = self.len.div_ceil(row_width).max(1);
        let mut out = format!("P5\n{row_width} {rows}\n255\n").into_bytes();
        out.reserve(rows * row_width);
        for r in 0..rows {
            for c in 0..row_width {
                let i = r * row_width + c;
                let px = if i < self.len && self.get(i) { 0u8 } else { 255u8 };
                out.push(px);
            }
        }
        Ok(out)
    }

    /// Iterator over all bits.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = bool> + ExactSizeIterator + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Zeroes any bits beyond `len` in the last word.
    fn canonicalize(&mut self) {
        let tail = self.len & 63;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
        let need = self.len.div_ceil(64);
        self.words.truncate(need);
        while self.words.len() < need {
            self.words.push(0);
        }
    }
}

impl Default for BitVector {
    fn default() -> Self {
        Self::new()
    }
}

impl FromIterator<bool> for BitVector {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        let mut v = BitVector::new();
        for b in iter {
            v.push(b);
        }
        v
    }
}

/// Detects the on-disk flavor of a bitstream file: ASCII '0'/'1' text or the
/// packed format with length header. ASCII wins when the whole file is made
/// of bit characters and whitespace.
pub fn parse_bitstream(data: &[u8]) -> Result<BitVector> {
    let looks_ascii = !data.is_empty()
        && data
            .iter()
            .all(|&b| b == b'0' || b == b'1' || b.is_ascii_whitespace());
    if looks_ascii {
        BitVector::from_ascii(std::str::from_utf8(data).unwrap())
    } else {
        BitVector::from_packed_bytes(data)
    }
}
