//! Conditional verifiable secret sharing: allocations per corruption model,
//! XOR splitting, Share with consistency tests and two-step abortion,
//! Reconstruct by majority vote, and share-wise linear maps.

mod config;
pub mod fuzz;
mod share;

pub use config::{binomial, CorruptionModel, VssConfig};
pub use share::{
    broadcast_abort, deal, majority, reconstruct, share, split, Abort, Endpoint, HonestNet, PartyOutput, Reconstruction,
    ShareTable, VssMessage, VssNet,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VssError {
    #[error("model {model} is not defined for t = {t}")]
    InvalidBound { model: CorruptionModel, t: usize },
    #[error("unknown corruption model {0:?}")]
    UnknownModel(String),
}
