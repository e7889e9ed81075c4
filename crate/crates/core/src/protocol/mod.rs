//! End-to-end post-processing across both labs: every QKD pair's output is
//! secret-shared among the units, sifted, estimated, reconciled, verified
//! and amplified share by share, so no single device sees the key.

mod codec;
mod ec;
mod policy;
mod run;
mod scenario;
mod scheme;

pub use codec::{fit, Reader, Writer, COUNT_BITS};
pub use ec::{ec_by_name, EcPlugin, ModelOnlyEc, TransparentEc, EC_NAMES};
pub use policy::{policy_by_name, AnalyticPolicy, FixedPolicy, KeyLength, KeyLengthPolicy, LengthContext};
pub use run::{
    finalize_keys, run_protocol, AbortState, FaultInjection, FinalKeys, Outcome, Phase, ProtocolRun, ProtocolSetup,
    SessionKeys,
};
pub use scenario::Scenario;
pub use scheme::{
    protocol_scheme_by_name, Bb84Protocol, MdiProtocol, PairRecords, PeCounts, ProtocolScheme, Sifting,
    PROTOCOL_SCHEME_NAMES,
};

use crate::bits::BitsError;
use crate::keyrate::KeyRateError;
use crate::sim::SimError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    KeyRate(#[from] KeyRateError),
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error("invalid protocol inputs: {0}")]
    Inputs(String),
    #[error("unknown {kind} {name:?}")]
    Unknown { kind: &'static str, name: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
