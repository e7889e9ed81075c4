//! Finite-key lengths, authentication cost and key rates for redundant
//! deployments, plus the input optimizer and named presets.

mod budget;
mod engine;
mod length;
mod optimize;
mod preset;
mod scheme;

pub use budget::{split_secrecy_budget, Deployment, SecrecySplit, SecurityBudget};
pub use engine::{evaluate, evaluate_provisioned, provision, KeyLengthResult};
pub use length::{
    auth_cost, e_tol, ec_leakage, ev_tag_bits, key_length_ac, key_length_pn, key_rate, raw_key_length_ac,
    raw_key_length_pn, AuthCost, MessageLengths,
};
pub use optimize::{optimize_inputs, Optimized, OptimizerOptions};
pub use preset::{preset_by_name, Preset, DEFAULT_PRESET, PRESET_NAMES};
pub use scheme::{scheme_by_name, Bb84, Mdi, PairMessages, QkdScheme, SCHEME_NAMES};

use crate::decoy::DecoyError;
use crate::stats::StatsError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KeyRateError {
    #[error(transparent)]
    Decoy(#[from] DecoyError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("invalid security budget: {0}")]
    Budget(String),
    #[error("invalid deployment: {0}")]
    Deployment(String),
    #[error("invalid protocol inputs: {0}")]
    Inputs(String),
    #[error("unknown scheme {0:?}")]
    UnknownScheme(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}
