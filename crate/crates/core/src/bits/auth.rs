use super::{gf2, AuthError, BitString};

/// Encrypted LFSR-Toeplitz authentication tag.
#[derive(Clone, Debug, PartialEq)]
pub struct AuthTag {
    pub tag: BitString,
    pub message_len: usize,
    /// Forgery probability bound the tag length was sized for.
    pub error_bound: f64,
}

/// Tag length `ceil(log2(2|m| / gamma))`, with `|m|` clamped to at least 1.
pub fn tag_len(message_len: usize, gamma: f64) -> usize {
    let m = message_len.max(1) as f64;
    ((2.0 * m).log2() + (1.0 / gamma).log2()).ceil() as usize
}

/// Pre-shared secret bits between one Alice unit and one Bob unit.
///
/// Bits are read at a cursor that only moves forward. Construction bits of a
/// tag are handed back by appending them at the tail, so each tag costs `k`
/// bits net while every message still gets a fresh matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPool {
    bits: BitString,
    cursor: usize,
}

impl KeyPool {
    pub fn new(bits: BitString) -> Self {
        Self { bits, cursor: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.cursor
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    fn take(&mut self, n: usize) -> BitString {
        let out = self.bits.slice(self.cursor, n);
        self.cursor += n;
        out
    }

    fn reallocate(&mut self, bits: &BitString) {
        self.bits.append(bits);
    }

    /// Draws `2k` matrix bits and `k` pad bits; returns the plaintext hash and the pad.
    fn draw(&mut self, m: &BitString, k: usize) -> Result<(BitString, BitString), AuthError> {
        if k > MAX_TAG_LEN {
            return Err(AuthError::TagTooLong(k));
        }
        if self.remaining() < 3 * k {
            return Err(AuthError::PoolExhausted { needed: 3 * k, available: self.remaining() });
        }
        let construction = self.take(2 * k);
        let pad = self.take(k);
        let hash = LfsrToeplitz::from_seed(&construction, k).hash(m);
        self.reallocate(&construction);
        Ok((hash, pad))
    }
}

pub const MAX_TAG_LEN: usize = 127;

/// Toeplitz matrix whose diagonals are an LFSR sequence: the hash of `m` is
/// `XOR_j m_j * (s_j, ..., s_{j+k-1})` with `s` generated by an irreducible
/// connection polynomial of degree `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LfsrToeplitz {
    /// Low `k` coefficients of the connection polynomial (`x^k` implicit).
    taps: u128,
    init: u128,
    k: usize,
}

impl LfsrToeplitz {
    /// Builds the hash from `2k` seed bits: the first `k` pick the polynomial,
    /// the next `k` the initial state.
    ///
    /// The polynomial is the first irreducible one at or after the seed value
    /// in a fixed scan order, with the constant term forced to 1.
    pub fn from_seed(seed: &BitString, k: usize) -> Self {
        assert!((1..=MAX_TAG_LEN).contains(&k) && seed.len() == 2 * k);
        let read = |off: usize| (0..k).fold(0u128, |acc, i| acc | ((seed.get(off + i) as u128) << i));
        let mask = (1u128 << k) - 1;
        let mut low = read(0) | 1;
        loop {
            if gf2::is_irreducible((1u128 << k) | low) {
                break;
            }
            low = (low.wrapping_add(2)) & mask | 1;
        }
        Self { taps: low, init: read(k), k }
    }

    pub fn output_len(&self) -> usize {
        self.k
    }

    pub fn seed_len(k: usize) -> usize {
        2 * k
    }

    pub fn hash(&self, m: &BitString) -> BitString {
        let k = self.k as u32;
        let mut state = self.init;
        let mut acc = 0u128;
        for bit in m.iter() {
            if bit {
                acc ^= state;
            }
            let feedback = ((state & self.taps).count_ones() & 1) as u128;
            state = (state >> 1) | (feedback << (k - 1));
        }
        BitString::from_iter((0..self.k).map(|i| (acc >> i) & 1 == 1))
    }
}

/// Tags `m`, returning the tag and the net number of pool bits consumed.
pub fn auth_tag(pool: &mut KeyPool, m: &BitString, gamma: f64) -> Result<(AuthTag, usize), AuthError> {
    let k = tag_len(m.len(), gamma);
    let (hash, pad) = pool.draw(m, k)?;
    Ok((AuthTag { tag: hash.xor(&pad), message_len: m.len(), error_bound: gamma }, k))
}

/// Recomputes the tag from the receiver's copy of the pool. An exhausted or
/// desynchronized pool rejects.
pub fn auth_verify(pool: &mut KeyPool, m: &BitString, tag: &AuthTag) -> bool {
    let k = tag_len(m.len(), tag.error_bound);
    match pool.draw(m, k) {
        Ok((hash, pad)) => tag.message_len == m.len() && hash.xor(&pad) == tag.tag,
        Err(_) => false,
    }
}
