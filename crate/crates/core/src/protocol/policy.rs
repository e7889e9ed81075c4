//! Key-length policies: how Bob's units turn the observed counts into the
//! final key length `l`.

use super::{ProtocolError, ProtocolScheme, Sifting};
use crate::inputs::ProtocolInputs;
use crate::keyrate::{ec_leakage, raw_key_length_ac, raw_key_length_pn, split_secrecy_budget, SecurityBudget};
use crate::sim::DeploymentConfig;
use crate::vss::CorruptionModel;

/// Everything a policy may look at.
pub struct LengthContext<'a> {
    pub scheme: &'a dyn ProtocolScheme,
    pub deployment: &'a DeploymentConfig,
    pub inputs: &'a ProtocolInputs,
    pub budget: &'a SecurityBudget,
    pub siftings: &'a [Sifting],
    /// Indices into each pair's `Z_j` forming `Z'_j`.
    pub selections: &'a [Vec<usize>],
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeyLength {
    pub l: u64,
    /// Before flooring and clamping.
    pub l_raw: f64,
    /// Empty when the policy does not estimate.
    pub per_pair_h: Vec<f64>,
    pub per_pair_lambda: Vec<f64>,
}

pub trait KeyLengthPolicy: Send + Sync {
    fn name(&self) -> String;

    fn key_length(&self, ctx: &LengthContext<'_>) -> Result<KeyLength, ProtocolError>;
}

/// Decoy estimation on the observed counts followed by the finite-key
/// formula of the module model. Small blocks certify nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct AnalyticPolicy;

impl KeyLengthPolicy for AnalyticPolicy {
    fn name(&self) -> String {
        "analytic".into()
    }

    fn key_length(&self, ctx: &LengthContext<'_>) -> Result<KeyLength, ProtocolError> {
        let d = ctx.deployment;
        let split = split_secrecy_budget(ctx.scheme.key_scheme(), d.module_model, d.n_q, ctx.budget.hat_eps_sec());
        let lambda = ec_leakage(ctx.inputs.m as f64, ctx.inputs.f_ec, ctx.inputs.e_tol);
        let per_pair_h = ctx
            .siftings
            .iter()
            .zip(ctx.selections)
            .map(|(s, sel)| ctx.scheme.entropy_bound(s, sel, ctx.inputs, split.gamma_sec))
            .collect::<Result<Vec<_>, _>>()?;
        let per_pair: Vec<(f64, f64)> = per_pair_h.iter().map(|&h| (h, lambda)).collect();
        let l_raw = match d.module_model {
            CorruptionModel::PN => raw_key_length_pn(&per_pair, ctx.budget.hat_eps_cor(), &split),
            _ => raw_key_length_ac(&per_pair, ctx.budget.hat_eps_cor(), &split),
        };
        let l = if l_raw.is_finite() && l_raw > 0.0 { l_raw.floor() as u64 } else { 0 };
        Ok(KeyLength { l, l_raw, per_pair_h, per_pair_lambda: vec![lambda; per_pair.len()] })
    }
}

/// A given length, for exercising the pipeline at toy block sizes.
#[derive(Clone, Copy, Debug)]
pub struct FixedPolicy(pub u64);

impl KeyLengthPolicy for FixedPolicy {
    fn name(&self) -> String {
        format!("fixed:{}", self.0)
    }

    fn key_length(&self, _ctx: &LengthContext<'_>) -> Result<KeyLength, ProtocolError> {
        Ok(KeyLength { l: self.0, l_raw: self.0 as f64, per_pair_h: Vec::new(), per_pair_lambda: Vec::new() })
    }
}

/// `analytic` or `fixed:<l>`.
pub fn policy_by_name(name: &str) -> Result<Box<dyn KeyLengthPolicy>, ProtocolError> {
    let name = name.trim().to_ascii_lowercase();
    if name == "analytic" {
        return Ok(Box::new(AnalyticPolicy));
    }
    if let Some(l) = name.strip_prefix("fixed:").and_then(|l| l.parse().ok()) {
        return Ok(Box::new(FixedPolicy(l)));
    }
    Err(ProtocolError::Unknown { kind: "key-length policy", name })
}
