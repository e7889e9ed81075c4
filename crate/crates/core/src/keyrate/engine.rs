use super::length::{auth_cost, e_tol, ec_leakage, ev_tag_bits, key_rate, raw_key_length_ac, raw_key_length_pn};
use super::{split_secrecy_budget, Deployment, KeyRateError, MessageLengths, QkdScheme, SecurityBudget};
use crate::channel::ChannelParams;
use crate::inputs::ProtocolInputs;
use crate::stats::rounds_for_blocksize;
use crate::vss::CorruptionModel;

#[derive(Clone, Debug, PartialEq)]
pub struct KeyLengthResult {
    /// Extractable length, floored and clamped at zero.
    pub l: u64,
    /// The same before flooring and clamping; negative when no key is left.
    pub l_raw: f64,
    pub per_pair_h: Vec<f64>,
    pub per_pair_lambda: Vec<f64>,
    /// Key-pool size `|k|`.
    pub pool_bits: f64,
    pub l_au: f64,
    /// Secret bits per transmitted signal; nonpositive means no key.
    pub k: f64,
    pub n: u64,
    pub e_tol: f64,
    pub gamma_sec: f64,
    pub gamma_au: f64,
}

impl KeyLengthResult {
    pub fn has_key(&self) -> bool {
        self.k > 0.0
    }
}

/// Fills in `N` (every pair reaches `M` key-basis detections except with
/// probability `γ_sift/n_q`) and `E_tol` (EV aborts with probability at most
/// `γ_EC`).
pub fn provision(
    scheme: &dyn QkdScheme,
    params: &ChannelParams,
    inputs: &ProtocolInputs,
    n_q: usize,
    budget: &SecurityBudget,
) -> Result<ProtocolInputs, KeyRateError> {
    let m = inputs.m as f64;
    let gain = scheme.key_basis_gain(params, inputs);
    let n = rounds_for_blocksize(m, gain, budget.gamma_sift / n_q as f64)?;
    if !(n.is_finite() && n < u64::MAX as f64) {
        return Err(KeyRateError::Inputs("round count overflows".into()));
    }
    Ok(ProtocolInputs {
        n: n as u64,
        e_tol: e_tol(scheme.key_basis_qber(params, inputs), m, budget.gamma_ec, n_q),
        ..inputs.clone()
    })
}

/// Key length, authentication cost and rate at the given `N` and `E_tol`,
/// with every pair at expected observables.
pub fn evaluate(
    scheme: &dyn QkdScheme,
    params: &ChannelParams,
    inputs: &ProtocolInputs,
    deployment: &Deployment,
    budget: &SecurityBudget,
) -> Result<KeyLengthResult, KeyRateError> {
    budget.validate()?;
    if !inputs.is_well_formed() {
        return Err(KeyRateError::Inputs("probabilities or intensity order".into()));
    }
    if inputs.n == 0 || inputs.m == 0 {
        return Err(KeyRateError::Inputs("N and M must be positive".into()));
    }
    let n_q = deployment.n_q;
    let split = split_secrecy_budget(scheme, deployment.qkd_model, n_q, budget.hat_eps_sec());
    let hat_eps_cor = budget.hat_eps_cor();
    let m = inputs.m as f64;

    // All pairs share one channel, so a single evaluation serves each of them.
    let h = scheme.entropy_bound(params, inputs, split.gamma_sec)?;
    let lambda = ec_leakage(m, inputs.f_ec, inputs.e_tol);
    let per_pair = vec![(h, lambda); n_q];
    let l_raw = match deployment.qkd_model {
        CorruptionModel::PN => raw_key_length_pn(&per_pair, hat_eps_cor, &split),
        _ => raw_key_length_ac(&per_pair, hat_eps_cor, &split),
    };
    let l = if l_raw.is_finite() && l_raw > 0.0 { l_raw.floor() as u64 } else { 0 };

    let pair = scheme.message_sizes(params, inputs);
    let tag = ev_tag_bits(hat_eps_cor);
    let bob = n_q as f64 * pair.key_basis_bits
        + n_q as f64 * lambda
        + tag
        + 2.0 * tag
        + (m * n_q as f64 + l as f64 - 1.0);
    let messages = MessageLengths { alice: vec![pair.alice; n_q], bob };
    let gamma_au = deployment.gamma_au(budget.eps_au);
    let auth = auth_cost(deployment.unit_model, deployment.t_c, &messages, gamma_au);

    Ok(KeyLengthResult {
        l,
        l_raw,
        per_pair_h: vec![h; n_q],
        per_pair_lambda: vec![lambda; n_q],
        pool_bits: auth.pool_bits,
        l_au: auth.l_au,
        k: key_rate(l as f64, auth.l_au, n_q, inputs.n),
        n: inputs.n,
        e_tol: inputs.e_tol,
        gamma_sec: split.gamma_sec,
        gamma_au,
    })
}

/// [`provision`] for the deployment's `n_q`, then [`evaluate`].
pub fn evaluate_provisioned(
    scheme: &dyn QkdScheme,
    params: &ChannelParams,
    inputs: &ProtocolInputs,
    deployment: &Deployment,
    budget: &SecurityBudget,
) -> Result<(ProtocolInputs, KeyLengthResult), KeyRateError> {
    let inputs = provision(scheme, params, inputs, deployment.n_q, budget)?;
    let result = evaluate(scheme, params, &inputs, deployment, budget)?;
    Ok((inputs, result))
}
