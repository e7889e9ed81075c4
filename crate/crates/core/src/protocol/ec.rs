//! Error-correction plugins. The key length always charges the modeled
//! leakage `M f_EC h(E_tol)`; a plugin only decides what is exchanged.

use super::ProtocolError;
use crate::bits::BitString;

pub trait EcPlugin: Send + Sync {
    fn name(&self) -> &'static str;

    /// Syndrome of one pair's sifted key. Must be GF(2)-linear so that it
    /// can be applied share by share.
    fn syndrome(&self, key: &BitString) -> BitString;

    /// Error pattern Alice adds to her key to match Bob's, `None` when the
    /// plugin does not model decoding.
    fn correction(&self, sy_a: &BitString, sy_b: &BitString) -> Option<BitString>;
}

/// Syndrome is the key itself, so the correction is exact. Useful for
/// checking the plumbing; it reveals the sifted key.
#[derive(Clone, Copy, Debug, Default)]
pub struct TransparentEc;

impl EcPlugin for TransparentEc {
    fn name(&self) -> &'static str {
        "transparent"
    }

    fn syndrome(&self, key: &BitString) -> BitString {
        key.clone()
    }

    fn correction(&self, sy_a: &BitString, sy_b: &BitString) -> Option<BitString> {
        Some(sy_a.xor(sy_b))
    }
}

/// Exchanges nothing and corrects nothing; only the leakage is accounted.
#[derive(Clone, Copy, Debug, Default)]
pub struct ModelOnlyEc;

impl EcPlugin for ModelOnlyEc {
    fn name(&self) -> &'static str {
        "model-only"
    }

    fn syndrome(&self, _key: &BitString) -> BitString {
        BitString::new()
    }

    fn correction(&self, _sy_a: &BitString, _sy_b: &BitString) -> Option<BitString> {
        None
    }
}

pub const EC_NAMES: [&str; 2] = ["transparent", "model-only"];

pub fn ec_by_name(name: &str) -> Result<Box<dyn EcPlugin>, ProtocolError> {
    match name.to_ascii_lowercase().as_str() {
        "transparent" => Ok(Box::new(TransparentEc)),
        "model-only" | "model" => Ok(Box::new(ModelOnlyEc)),
        _ => Err(ProtocolError::Unknown { kind: "error-correction plugin", name: name.to_string() }),
    }
}
