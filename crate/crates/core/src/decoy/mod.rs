//! Decoy-state parameter estimation: single-photon yields and error bounds
//! from multi-intensity observables, transferred to the sifted key.

mod bb84;
mod mdi;

pub use bb84::{bb84_pe, Bb84Budgets, PeResultBb84};
pub use mdi::{
    mdi_candidates, mdi_e11x_upper, mdi_pe, mdi_s11x_lower, mdi_transfer_to_z, tau, MdiBudgets, MdiCandidate,
    PeResultMdi, V_PAIRS, W_VECTORS,
};

use crate::stats::{binary_entropy, StatsError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecoyError {
    #[error("intensities violate {0}")]
    IntensityOrder(&'static str),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// `n [1 - h(φ)]`, or `None` when no single-photon detection is certified.
/// Phase-error bounds above one half certify nothing, so `h` saturates there.
pub(crate) fn entropy_bound(n_lower: f64, phi_upper: Option<f64>) -> Option<f64> {
    match phi_upper {
        Some(phi) if n_lower > 0.0 => Some(n_lower * (1.0 - binary_entropy(phi.min(0.5)))),
        _ => None,
    }
}
