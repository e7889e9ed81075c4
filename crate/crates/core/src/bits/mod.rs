//! GF(2) bit strings, Toeplitz hashing and LFSR-Toeplitz authentication.

mod auth;
mod bitstring;
pub mod gf2;
mod toeplitz;

pub use auth::{auth_tag, auth_verify, tag_len, AuthTag, KeyPool, LfsrToeplitz, MAX_TAG_LEN};
pub use bitstring::BitString;
pub use toeplitz::ToeplitzHash;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BitsError {
    #[error("{what}: expected {expected} bits, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("malformed bit string: {0}")]
    BadEncoding(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuthError {
    #[error("key pool exhausted: need {needed} bits, {available} left")]
    PoolExhausted { needed: usize, available: usize },
    #[error("tag length {0} exceeds the supported maximum of 127 bits")]
    TagTooLong(usize),
}
