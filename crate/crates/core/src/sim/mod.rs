//! In-process network of QKD modules and post-processing units: deployment
//! shapes, adversary scripts with leak sinks, secure and authenticated
//! channels, message transcripts and random bit string generation.

mod adversary;
mod deploy;
mod network;
mod rbs;
mod transcript;

pub use adversary::{AdversaryScript, Behavior, LeakRecord, LeakSinks, MessageClass, Mutation, SinkId};
pub use deploy::{DeploymentConfig, Lab, PartyId, Role};
pub use network::{build_network, inject, Channel, ChannelKind, Delivery, LabNet, NetworkOptions, Session};
pub use rbs::{rbs_generate, RbsOutput};
pub use transcript::{Transcript, TranscriptEntry};

use crate::bits::AuthError;
use crate::vss::VssError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid deployment: {0}")]
    InvalidDeployment(String),
    #[error("adversary script out of bounds: {0}")]
    ScriptViolation(String),
    #[error("key pool between {from} and {to} exhausted: need {needed} bits, {available} left")]
    PoolExhausted { from: PartyId, to: PartyId, needed: usize, available: usize },
    #[error(transparent)]
    Auth(AuthError),
    #[error(transparent)]
    Vss(#[from] VssError),
    #[error("cannot parse {0}")]
    Parse(String),
}
