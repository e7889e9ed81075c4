//! Plain-text scenario files: one `key = value` per line, `#` starts a
//! comment.
//!
//! ```text
//! scheme = mdi
//! module_model = AC
//! t_q = 1
//! unit_model = AC
//! t_c = 1
//! m = 64
//! policy = fixed:32
//! corrupt.B.u2 = tamper:reveal:flip-first
//! fault.forge = reconciliation
//! ```

use std::str::FromStr;

use super::{ec_by_name, policy_by_name, protocol_scheme_by_name, run_protocol, FaultInjection, Phase, ProtocolError, ProtocolRun, ProtocolSetup};
use crate::channel::ChannelParams;
use crate::inputs::ProtocolInputs;
use crate::keyrate::{preset_by_name, provision, DEFAULT_PRESET};
use crate::sim::{AdversaryScript, Behavior, DeploymentConfig, PartyId};
use crate::vss::CorruptionModel;

/// Optional replacements for the scheme's reference source settings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InputOverrides {
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub omega: Option<f64>,
    pub q_z: Option<f64>,
    pub p_mu: Option<f64>,
    pub p_nu: Option<f64>,
    pub p_omega: Option<f64>,
    pub f_ec: Option<f64>,
    pub e_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub scheme: String,
    pub module_model: CorruptionModel,
    pub t_q: usize,
    pub unit_model: CorruptionModel,
    pub t_c: usize,
    pub behaviors: Vec<(PartyId, Behavior)>,
    pub collaborative: bool,
    pub loss_db: f64,
    pub m: u64,
    /// Rounds per pair; provisioned from the preset's budgets when absent.
    pub n: Option<u64>,
    pub policy: String,
    pub ec: String,
    pub preset: String,
    pub seed: u64,
    pub pool_bits: Option<usize>,
    pub faults: FaultInjection,
    pub overrides: InputOverrides,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            scheme: "mdi".into(),
            module_model: CorruptionModel::AC,
            t_q: 0,
            unit_model: CorruptionModel::AC,
            t_c: 0,
            behaviors: Vec::new(),
            collaborative: false,
            loss_db: 0.0,
            m: 64,
            n: None,
            policy: "fixed:32".into(),
            ec: "transparent".into(),
            preset: DEFAULT_PRESET.into(),
            seed: 0,
            pool_bits: None,
            faults: FaultInjection::default(),
            overrides: InputOverrides::default(),
        }
    }
}

fn value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, ProtocolError> {
    v.parse().map_err(|_| ProtocolError::Parse { line, message: format!("bad value {v:?} for {key}") })
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let mut s = Scenario::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, v)) = content.split_once('=') else {
                return Err(ProtocolError::Parse { line, message: format!("expected key = value, got {content:?}") });
            };
            s.set(line, key.trim(), v.trim())?;
        }
        Ok(s)
    }

    /// Applies one `key = value` setting; `line` only labels errors.
    pub fn set(&mut self, line: usize, key: &str, v: &str) -> Result<(), ProtocolError> {
        let o = &mut self.overrides;
        match key {
            "scheme" => self.scheme = v.to_string(),
            "module_model" => self.module_model = value(line, key, v)?,
            "t_q" => self.t_q = value(line, key, v)?,
            "unit_model" => self.unit_model = value(line, key, v)?,
            "t_c" => self.t_c = value(line, key, v)?,
            "collaborative" => self.collaborative = value(line, key, v)?,
            "loss_db" => self.loss_db = value(line, key, v)?,
            "m" => self.m = value(line, key, v)?,
            "n" => self.n = Some(value(line, key, v)?),
            "policy" => self.policy = v.to_string(),
            "ec" => self.ec = v.to_string(),
            "preset" => self.preset = v.to_string(),
            "seed" => self.seed = value(line, key, v)?,
            "pool_bits" => self.pool_bits = Some(value(line, key, v)?),
            "fault.flip_bit" => self.faults.flip_corrected_bit = Some(value(line, key, v)?),
            "fault.forge" => self.faults.forge_phase = Some(v.parse::<Phase>()?),
            "lambda" => o.lambda = Some(value(line, key, v)?),
            "mu" => o.mu = Some(value(line, key, v)?),
            "nu" => o.nu = Some(value(line, key, v)?),
            "omega" => o.omega = Some(value(line, key, v)?),
            "q_z" => o.q_z = Some(value(line, key, v)?),
            "p_mu" => o.p_mu = Some(value(line, key, v)?),
            "p_nu" => o.p_nu = Some(value(line, key, v)?),
            "p_omega" => o.p_omega = Some(value(line, key, v)?),
            "f_ec" => o.f_ec = Some(value(line, key, v)?),
            "e_tol" => o.e_tol = Some(value(line, key, v)?),
            _ => {
                let Some(party) = key.strip_prefix("corrupt.") else {
                    return Err(ProtocolError::Parse { line, message: format!("unknown key {key:?}") });
                };
                let party: PartyId = party.parse().map_err(|e: crate::sim::SimError| ProtocolError::Parse { line, message: e.to_string() })?;
                let behavior: Behavior = v.parse().map_err(|e: crate::sim::SimError| ProtocolError::Parse { line, message: e.to_string() })?;
                self.behaviors.push((party, behavior));
            }
        }
        Ok(())
    }

    pub fn deployment(&self) -> Result<DeploymentConfig, ProtocolError> {
        Ok(DeploymentConfig::new(self.module_model, self.t_q, self.unit_model, self.t_c)?)
    }

    pub fn script(&self) -> AdversaryScript {
        self.behaviors
            .iter()
            .fold(AdversaryScript::honest(), |s, &(p, b)| s.with(p, b))
            .collaborative(self.collaborative)
    }

    pub fn setup(&self) -> Result<ProtocolSetup, ProtocolError> {
        let preset = preset_by_name(&self.preset)?;
        let mut setup = ProtocolSetup::new(
            protocol_scheme_by_name(&self.scheme)?,
            ec_by_name(&self.ec)?,
            policy_by_name(&self.policy)?,
            preset.budget,
        );
        if let Some(bits) = self.pool_bits {
            setup.pool_bits = bits;
        }
        setup.faults = self.faults.clone();
        Ok(setup)
    }

    /// Channel at the scenario's loss and the source settings, with `N` and
    /// `E_tol` provisioned unless given.
    pub fn inputs(&self, setup: &ProtocolSetup) -> Result<(ChannelParams, ProtocolInputs), ProtocolError> {
        let preset = preset_by_name(&self.preset)?;
        let params = preset.channel.with_loss(self.loss_db);
        let o = &self.overrides;
        let scheme = setup.scheme.key_scheme();
        let base = scheme.reference_inputs(o.omega.unwrap_or(preset.omega), self.m, o.f_ec.unwrap_or(preset.f_ec));
        let mut inputs = ProtocolInputs {
            lambda: o.lambda.unwrap_or(base.lambda),
            mu: o.mu.unwrap_or(base.mu),
            nu: o.nu.unwrap_or(base.nu),
            q_z: o.q_z.unwrap_or(base.q_z),
            p_mu: o.p_mu.unwrap_or(base.p_mu),
            p_nu: o.p_nu.unwrap_or(base.p_nu),
            p_omega: o.p_omega.unwrap_or(base.p_omega),
            ..base
        };
        let n_q = self.deployment()?.n_q;
        let provisioned = provision(scheme, &params, &inputs, n_q, &setup.budget)?;
        inputs.n = self.n.unwrap_or(provisioned.n);
        inputs.e_tol = o.e_tol.unwrap_or(provisioned.e_tol);
        Ok((params, inputs))
    }

    pub fn run(&self) -> Result<ProtocolRun, ProtocolError> {
        let setup = self.setup()?;
        let (params, inputs) = self.inputs(&setup)?;
        run_protocol(&setup, &self.deployment()?, &params, &inputs, &self.script(), self.seed)
    }
}
