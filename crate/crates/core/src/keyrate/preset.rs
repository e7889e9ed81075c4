use super::{KeyRateError, SecurityBudget};
use crate::channel::ChannelParams;

/// Named bundle of budgets, device parameters and fixed protocol inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub budget: SecurityBudget,
    /// Device parameters at zero loss.
    pub channel: ChannelParams,
    /// Weakest decoy intensity, held fixed by the optimizer.
    pub omega: f64,
    pub f_ec: f64,
    pub block_sizes: Vec<u64>,
    /// QKD pairs of the PN deployment.
    pub pn_pairs: usize,
}

pub const DEFAULT_PRESET: &str = "paper-2020-defaults";
pub const PRESET_NAMES: [&str; 1] = [DEFAULT_PRESET];

pub fn preset_by_name(name: &str) -> Result<Preset, KeyRateError> {
    match name {
        DEFAULT_PRESET => Ok(Preset {
            name: DEFAULT_PRESET,
            budget: SecurityBudget { eps_cor: 1e-8, eps_sec: 1e-8, eps_au: 5e-9, gamma_sift: 5e-3, gamma_ec: 5e-3 },
            channel: ChannelParams::reference_defaults(0.0),
            omega: 1e-3,
            f_ec: 1.16,
            block_sizes: vec![100_000, 1_000_000],
            pn_pairs: 2,
        }),
        _ => Err(KeyRateError::UnknownPreset(name.to_string())),
    }
}
