use super::KeyRateError;
use crate::channel::{
    bb84_expected_observables, bb84_gain_and_error, mdi_expected_observables, mdi_gain_and_error, ChannelParams,
};
use crate::decoy::{bb84_pe, mdi_pe, Bb84Budgets, MdiBudgets};
use crate::inputs::ProtocolInputs;

/// Expected classical message sizes of one pair, in bits.
#[derive(Clone, Debug, PartialEq)]
pub struct PairMessages {
    /// Alice's sifting message `|m_A^j|`.
    pub alice: f64,
    /// Alice's key-basis bits announced to locate `Z'`, `|r_A^j|_Z|`.
    pub key_basis_bits: f64,
}

/// A QKD scheme as seen by the key-length engine: its channel statistics at
/// expected values and its parameter-estimation bound.
pub trait QkdScheme: Send + Sync {
    fn name(&self) -> &'static str;

    /// Number of error terms in the smoothing parameter of one pair.
    fn smoothing_terms(&self) -> usize;

    /// Whether the key basis uses its own intensity `lambda`.
    fn uses_lambda(&self) -> bool;

    /// Probability that a round joins the key-basis detection set.
    fn key_basis_gain(&self, params: &ChannelParams, inputs: &ProtocolInputs) -> f64;

    /// Expected key-basis error rate.
    fn key_basis_qber(&self, params: &ChannelParams, inputs: &ProtocolInputs) -> f64;

    /// Entropy bound `h_ε` of one pair at expected observables, zero when
    /// no single-photon contribution is certified.
    fn entropy_bound(&self, params: &ChannelParams, inputs: &ProtocolInputs, gamma_sec: f64) -> Result<f64, KeyRateError>;

    fn message_sizes(&self, params: &ChannelParams, inputs: &ProtocolInputs) -> PairMessages;

    /// Hand-picked reasonable settings: `mu = 0.3`, `nu = 0.05`, `q_Z = 0.7`.
    fn reference_inputs(&self, omega: f64, m: u64, f_ec: f64) -> ProtocolInputs {
        ProtocolInputs {
            lambda: 0.3,
            mu: 0.3,
            nu: 0.05,
            omega,
            q_z: 0.7,
            p_mu: 0.4,
            p_nu: 0.4,
            p_omega: 0.2,
            m,
            n: 0,
            e_tol: 0.0,
            f_ec,
        }
    }
}

/// Measurement-device-independent scheme with a dedicated key intensity.
#[derive(Clone, Copy, Debug, Default)]
pub struct Mdi;

impl QkdScheme for Mdi {
    fn name(&self) -> &'static str {
        "mdi"
    }

    fn smoothing_terms(&self) -> usize {
        MdiBudgets::TERMS
    }

    fn uses_lambda(&self) -> bool {
        true
    }

    fn key_basis_gain(&self, params: &ChannelParams, inputs: &ProtocolInputs) -> f64 {
        mdi_gain_and_error(params, inputs).g_zz
    }

    fn key_basis_qber(&self, params: &ChannelParams, inputs: &ProtocolInputs) -> f64 {
        mdi_gain_and_error(params, inputs).e_zz
    }

    fn entropy_bound(&self, params: &ChannelParams, inputs: &ProtocolInputs, gamma_sec: f64) -> Result<f64, KeyRateError> {
        let (obs, _) = mdi_expected_observables(params, inputs, inputs.n);
        Ok(mdi_pe(&obs, inputs, &MdiBudgets::common(gamma_sec))?.entropy_bound().unwrap_or(0.0))
    }

    fn message_sizes(&self, params: &ChannelParams, inputs: &ProtocolInputs) -> PairMessages {
        let (_, sizes) = mdi_expected_observables(params, inputs, inputs.n);
        PairMessages { alice: sizes.intensities + sizes.bits_x, key_basis_bits: sizes.bits_z }
    }
}

/// Decoy-state BB84 with three intensities in both bases.
#[derive(Clone, Copy, Debug, Default)]
pub struct Bb84;

impl QkdScheme for Bb84 {
    fn name(&self) -> &'static str {
        "bb84"
    }

    fn smoothing_terms(&self) -> usize {
        Bb84Budgets::TERMS
    }

    fn uses_lambda(&self) -> bool {
        false
    }

    fn key_basis_gain(&self, params: &ChannelParams, inputs: &ProtocolInputs) -> f64 {
        bb84_gain_and_error(params, inputs).g_zz.iter().sum()
    }

    fn key_basis_qber(&self, params: &ChannelParams, inputs: &ProtocolInputs) -> f64 {
        bb84_gain_and_error(params, inputs).e_z
    }

    fn entropy_bound(&self, params: &ChannelParams, inputs: &ProtocolInputs, gamma_sec: f64) -> Result<f64, KeyRateError> {
        let obs = bb84_expected_observables(params, inputs, inputs.n, inputs.m);
        Ok(bb84_pe(&obs, inputs, &Bb84Budgets::common(gamma_sec))?.entropy_bound().unwrap_or(0.0))
    }

    /// Alice announces her bits (N), her trit-valued settings (2N) and her
    /// X-basis bits; the key-basis bits are `q_Z N` on average.
    fn message_sizes(&self, _params: &ChannelParams, inputs: &ProtocolInputs) -> PairMessages {
        let n = inputs.n as f64;
        PairMessages { alice: n + 2.0 * n + inputs.q_x() * n, key_basis_bits: inputs.q_z * n }
    }
}

pub const SCHEME_NAMES: [&str; 2] = ["mdi", "bb84"];

pub fn scheme_by_name(name: &str) -> Result<Box<dyn QkdScheme>, KeyRateError> {
    match name.to_ascii_lowercase().as_str() {
        "mdi" => Ok(Box::new(Mdi)),
        "bb84" => Ok(Box::new(Bb84)),
        _ => Err(KeyRateError::UnknownScheme(name.to_string())),
    }
}
