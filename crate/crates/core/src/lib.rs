//! Distributed QKD post-processing with redundant devices.
//!
//! The crate covers the whole chain: GF(2) hashing and authentication
//! ([`bits`]), conditional verifiable secret sharing ([`vss`]), a simulated
//! network of QKD modules and post-processing units ([`sim`]), concentration
//! bounds ([`stats`]), channel models ([`channel`]), decoy-state parameter
//! estimation ([`decoy`]), finite-key lengths and rates ([`keyrate`]) and the
//! end-to-end protocol ([`protocol`]).

pub mod bits;
pub mod channel;
pub mod decoy;
pub mod inputs;
pub mod keyrate;
pub mod protocol;
pub mod sim;
pub mod stats;
pub mod vss;
