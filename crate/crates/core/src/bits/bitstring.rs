use std::fmt;

use rand::{Rng, RngCore};

use super::BitsError;

/// Packed bit sequence. Bit `i` lives in word `i / 64` at position `i % 64`,
/// so byte serialization is little-endian within each byte.
///
/// Bits past `len` in the last word are always zero, which keeps derived
/// equality and hashing meaningful.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self { words: vec![0; words_for(len)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut s = Self { words: vec![u64::MAX; words_for(len)], len };
        s.mask_tail();
        s
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut s = Self { words: (0..words_for(len)).map(|_| rng.random()).collect(), len };
        s.mask_tail();
        s
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        bits.iter().copied().collect()
    }

    /// Parses a string of `'0'`/`'1'` characters, first character is bit 0.
    pub fn from_binary(s: &str) -> Result<Self, BitsError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitsError::BadEncoding(format!("unexpected character {other:?}"))),
            })
            .collect()
    }

    /// Low `width` bits of `value`, least significant first.
    pub fn from_u64(value: u64, width: usize) -> Self {
        assert!(width <= 64);
        (0..width).map(|i| (value >> i) & 1 == 1).collect()
    }

    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64);
        self.words.first().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        self.len += 1;
        if bit {
            self.words[(self.len - 1) / 64] |= 1u64 << ((self.len - 1) % 64);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| (self.words[i / 64] >> (i % 64)) & 1 == 1)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// XOR with zero-padding of the shorter operand.
    pub fn xor(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    pub fn xor_assign(&mut self, other: &BitString) {
        if other.len > self.len {
            self.words.resize(words_for(other.len), 0);
            self.len = other.len;
        }
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w ^= o;
        }
    }

    pub fn append(&mut self, other: &BitString) {
        let shift = self.len % 64;
        if shift == 0 {
            self.words.truncate(words_for(self.len));
            self.words.extend_from_slice(&other.words);
        } else {
            for &w in &other.words {
                *self.words.last_mut().unwrap() |= w << shift;
                self.words.push(w >> (64 - shift));
            }
        }
        self.len += other.len;
        self.words.truncate(words_for(self.len));
    }

    pub fn concat<'a, I: IntoIterator<Item = &'a BitString>>(parts: I) -> BitString {
        let mut out = BitString::new();
        for p in parts {
            out.append(p);
        }
        out
    }

    /// Bits at the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> BitString {
        positions.iter().map(|&p| self.get(p)).collect()
    }

    pub fn slice(&self, start: usize, len: usize) -> BitString {
        assert!(start + len <= self.len);
        let mut out = BitString::zeros(len);
        for k in 0..out.words.len() {
            out.words[k] = self.word_at(start + 64 * k);
        }
        out.mask_tail();
        out
    }

    /// 64 bits starting at bit offset `start`; positions past the end read as zero.
    pub(crate) fn word_at(&self, start: usize) -> u64 {
        let (w, s) = (start / 64, start % 64);
        let lo = self.words.get(w).copied().unwrap_or(0);
        if s == 0 {
            return lo;
        }
        let hi = self.words.get(w + 1).copied().unwrap_or(0);
        (lo >> s) | (hi << (64 - s))
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn reversed(&self) -> BitString {
        (0..self.len).rev().map(|i| self.get(i)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len.div_ceil(8);
        (0..n).map(|b| (self.words[b / 8] >> (8 * (b % 8))) as u8).collect()
    }

    /// Golden-file form: `"<len>:<lowercase hex of the bytes>"`.
    pub fn to_hex(&self) -> String {
        let mut s = format!("{}:", self.len);
        for b in self.to_bytes() {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn from_hex(text: &str) -> Result<Self, BitsError> {
        let (len, payload) = text
            .split_once(':')
            .ok_or_else(|| BitsError::BadEncoding(format!("missing length prefix in {text:?}")))?;
        let len: usize = len
            .parse()
            .map_err(|_| BitsError::BadEncoding(format!("bad length prefix in {text:?}")))?;
        if payload.len() != 2 * len.div_ceil(8) {
            return Err(BitsError::BadEncoding(format!("payload size does not match length {len}")));
        }
        let mut out = BitString::zeros(len);
        for (b, chunk) in payload.as_bytes().chunks(2).enumerate() {
            let byte = std::str::from_utf8(chunk)
                .ok()
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| BitsError::BadEncoding(format!("bad hex in {text:?}")))?;
            out.words[b / 8] |= (byte as u64) << (8 * (b % 8));
        }
        let mut masked = out.clone();
        masked.mask_tail();
        if masked.words != out.words {
            return Err(BitsError::BadEncoding("nonzero padding bits".into()));
        }
        Ok(out)
    }

    fn mask_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        let mut s = BitString::new();
        for b in iter {
            s.push(b);
        }
        s
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
            write!(f, "BitString({s})")
        } else {
            write!(f, "BitString({})", self.to_hex())
        }
    }
}
