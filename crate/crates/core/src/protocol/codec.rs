//! Fixed-width field encoding of classical announcements.

use crate::bits::BitString;

/// Width of counts and positions inside announcements.
pub const COUNT_BITS: usize = 32;

#[derive(Clone, Debug, Default)]
pub struct Writer(BitString);

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn uint(&mut self, value: u64, width: usize) -> &mut Self {
        debug_assert!(width <= 64);
        for i in 0..width {
            self.0.push((value >> i) & 1 == 1);
        }
        self
    }

    pub fn bit(&mut self, bit: bool) -> &mut Self {
        self.0.push(bit);
        self
    }

    pub fn raw(&mut self, bits: &BitString) -> &mut Self {
        self.0.append(bits);
        self
    }

    /// Length-prefixed bit string.
    pub fn field(&mut self, bits: &BitString) -> &mut Self {
        self.uint(bits.len() as u64, COUNT_BITS).raw(bits)
    }

    /// Length-prefixed list of positions.
    pub fn positions(&mut self, positions: &[usize]) -> &mut Self {
        self.uint(positions.len() as u64, COUNT_BITS);
        for &p in positions {
            self.uint(p as u64, COUNT_BITS);
        }
        self
    }

    pub fn finish(&mut self) -> BitString {
        std::mem::take(&mut self.0)
    }
}

/// Reads what [`Writer`] wrote; every getter returns `None` past the end.
#[derive(Clone, Debug)]
pub struct Reader<'a> {
    bits: &'a BitString,
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bits: &'a BitString) -> Self {
        Self { bits, pos: 0 }
    }

    pub fn raw(&mut self, len: usize) -> Option<BitString> {
        if self.pos + len > self.bits.len() {
            return None;
        }
        let out = self.bits.slice(self.pos, len);
        self.pos += len;
        Some(out)
    }

    pub fn uint(&mut self, width: usize) -> Option<u64> {
        debug_assert!(width <= 64);
        if self.pos + width > self.bits.len() {
            return None;
        }
        let value = (0..width).fold(0u64, |acc, i| acc | (self.bits.get(self.pos + i) as u64) << i);
        self.pos += width;
        Some(value)
    }

    pub fn bit(&mut self) -> Option<bool> {
        let bit = (self.pos < self.bits.len()).then(|| self.bits.get(self.pos))?;
        self.pos += 1;
        Some(bit)
    }

    pub fn count(&mut self) -> Option<usize> {
        self.uint(COUNT_BITS).map(|v| v as usize)
    }

    pub fn field(&mut self) -> Option<BitString> {
        let len = self.count()?;
        self.raw(len)
    }

    pub fn positions(&mut self) -> Option<Vec<usize>> {
        let len = self.count()?;
        if len.checked_mul(COUNT_BITS)? > self.bits.len() - self.pos {
            return None;
        }
        (0..len).map(|_| self.count()).collect()
    }

    /// Whether every bit was consumed.
    pub fn is_done(&self) -> bool {
        self.pos == self.bits.len()
    }
}

/// Truncates or zero-pads to `len` bits.
pub fn fit(bits: &BitString, len: usize) -> BitString {
    if bits.len() >= len {
        bits.slice(0, len)
    } else {
        let mut out = bits.clone();
        out.append(&BitString::zeros(len - bits.len()));
        out
    }
}
