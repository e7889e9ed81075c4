use super::{entropy_bound, DecoyError};
use crate::channel::Bb84Observables;
use crate::inputs::ProtocolInputs;
use crate::stats::{hoeffding_delta, serfling_upsilon};

/// Hoeffding and Serfling error terms of the BB84 estimation.
#[derive(Clone, Debug, PartialEq)]
pub struct Bb84Budgets {
    pub eps_h: f64,
    pub eps_s: f64,
}

impl Bb84Budgets {
    pub fn common(gamma: f64) -> Self {
        Self { eps_h: gamma, eps_s: gamma }
    }

    /// Smoothing parameter `8 ε_H + ε_S`.
    pub fn smooth(&self) -> f64 {
        8.0 * self.eps_h + self.eps_s
    }

    pub const TERMS: usize = 9;
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeResultBb84 {
    pub tau1: f64,
    pub n1z_l: f64,
    pub s1x_l: f64,
    pub e1x_u: f64,
    pub e1z_u: f64,
    /// `None` when `n1z_l = 0`.
    pub phi1z_u: Option<f64>,
    pub epsilon_smooth: f64,
}

impl PeResultBb84 {
    pub fn entropy_bound(&self) -> Option<f64> {
        entropy_bound(self.n1z_l, self.phi1z_u)
    }
}

/// Three-intensity single-photon lower bound shared by the key and test
/// bases: `counts` in `[mu, nu, omega]` order, Hoeffding deviation `dev`.
fn single_photon_lower(inputs: &ProtocolInputs, tau1: f64, counts: [f64; 3], dev: f64) -> f64 {
    let (mu, nu, om) = (inputs.mu, inputs.nu, inputs.omega);
    let (p_mu, p_nu, p_om) = (inputs.p_mu, inputs.p_nu, inputs.p_omega);
    let pre = mu * tau1 / (mu * (nu - om) - (nu * nu - om * om));
    let inner = nu.exp() / p_nu * (counts[1] - dev)
        - om.exp() / p_om * (counts[2] + dev)
        - (nu * nu - om * om) / (mu * mu) * mu.exp() / p_mu * (counts[0] + dev);
    (pre * inner).floor()
}

/// Decoy estimation for one BB84 pair.
pub fn bb84_pe(obs: &Bb84Observables, inputs: &ProtocolInputs, budgets: &Bb84Budgets) -> Result<PeResultBb84, DecoyError> {
    let (mu, nu, om) = (inputs.mu, inputs.nu, inputs.omega);
    if !(mu > nu + om && nu > om && om >= 0.0) {
        return Err(DecoyError::IntensityOrder("mu > nu + omega, nu > omega >= 0"));
    }
    let probs = inputs.decoy_probs();
    let tau1: f64 = inputs.decoys().iter().zip(probs).map(|(a, p)| a * (-a).exp() * p).sum();
    let m = inputs.m as f64;

    let n1z_l = single_photon_lower(inputs, tau1, obs.z_prime, hoeffding_delta(m, budgets.eps_h)).clamp(0.0, m);
    let x_total: f64 = obs.x_sizes.iter().sum();
    let s1x_l = single_photon_lower(inputs, tau1, obs.x_sizes, hoeffding_delta(x_total, budgets.eps_h)).clamp(0.0, x_total);

    let e_total: f64 = obs.x_errors.iter().sum();
    let dev = hoeffding_delta(e_total, budgets.eps_h);
    let e1x_u = (tau1 / (nu - om) * (nu.exp() / inputs.p_nu * (obs.x_errors[1] + dev) - om.exp() / inputs.p_omega * (obs.x_errors[2] - dev)))
        .ceil()
        .max(0.0);

    let e1z_u = if n1z_l > 0.0 && s1x_l > 0.0 {
        (n1z_l * e1x_u / s1x_l + (s1x_l + n1z_l) * serfling_upsilon(n1z_l, s1x_l, budgets.eps_s)).ceil().min(n1z_l)
    } else {
        n1z_l
    };
    Ok(PeResultBb84 {
        tau1,
        n1z_l,
        s1x_l,
        e1x_u,
        e1z_u,
        phi1z_u: (n1z_l > 0.0).then(|| e1z_u / n1z_l),
        epsilon_smooth: budgets.smooth(),
    })
}
