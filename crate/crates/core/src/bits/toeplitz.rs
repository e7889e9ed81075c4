use super::{BitString, BitsError};

/// Toeplitz matrix hash `T[i][j] = seed[input_len - 1 + i - j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToeplitzHash {
    seed: BitString,
    input_len: usize,
    output_len: usize,
}

impl ToeplitzHash {
    pub fn seed_len(input_len: usize, output_len: usize) -> usize {
        (input_len + output_len).saturating_sub(1)
    }

    pub fn new(seed: BitString, input_len: usize, output_len: usize) -> Result<Self, BitsError> {
        let expected = Self::seed_len(input_len, output_len);
        if seed.len() != expected {
            return Err(BitsError::LengthMismatch { what: "toeplitz seed", expected, got: seed.len() });
        }
        Ok(Self { seed, input_len, output_len })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn seed(&self) -> &BitString {
        &self.seed
    }

    pub fn apply(&self, m: &BitString) -> Result<BitString, BitsError> {
        if m.len() != self.input_len {
            return Err(BitsError::LengthMismatch { what: "hash input", expected: self.input_len, got: m.len() });
        }
        // Output bit i is the parity of reverse(m) AND seed[i .. i + input_len].
        let rev = m.reversed();
        let rw = rev.words();
        let mut out = BitString::zeros(self.output_len);
        for i in 0..self.output_len {
            let mut acc = 0u64;
            for (k, w) in rw.iter().enumerate() {
                acc ^= w & self.seed.word_at(i + 64 * k);
            }
            if acc.count_ones() % 2 == 1 {
                out.set(i, true);
            }
        }
        Ok(out)
    }
}
