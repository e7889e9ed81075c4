//! Concentration bounds, binary entropy and the Lambert W function.

mod bounds;
mod lambert;

pub use bounds::{
    binary_entropy, chernoff_delta_lower, chernoff_delta_upper, hoeffding_delta, inverse_chernoff,
    inverse_chernoff_lower, inverse_chernoff_upper, rounds_for_blocksize, serfling_lambda, serfling_upsilon,
    InverseChernoff,
};
pub use lambert::{lambert_w, lambert_w_shifted, Branch};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("{0}")]
    Domain(&'static str),
    #[error("{0}")]
    Infeasible(&'static str),
}
