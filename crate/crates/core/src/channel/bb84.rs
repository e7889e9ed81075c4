use rand::Rng;

use super::mdi::binomial;
use super::ChannelParams;
use crate::inputs::{ProtocolInputs, DECOYS};

/// Point-to-point link with a passive two-detector receiver; double clicks
/// are assigned to a random outcome.
#[derive(Clone, Debug)]
pub struct Bb84Model {
    pub eta: f64,
    pub p_d: f64,
    pub delta: f64,
}

impl Bb84Model {
    pub fn new(params: &ChannelParams) -> Self {
        Self { eta: params.efficiency(params.loss_db), p_d: params.p_d, delta: params.delta_a }
    }

    /// Detection probability for intensity `a`.
    pub fn gain(&self, a: f64) -> f64 {
        1.0 - (1.0 - self.p_d).powi(2) * (-self.eta * a).exp()
    }

    /// Error rate for intensity `a` given matching bases.
    pub fn error_rate(&self, a: f64) -> f64 {
        let q = self.gain(a);
        if q <= 0.0 {
            return 0.0;
        }
        let pd = self.p_d;
        let (s, c) = self.delta.sin_cos();
        let h = ((-self.eta * a * c * c).exp() - (-self.eta * a * s * s).exp()) / 2.0;
        let qe = pd * pd / 2.0 + pd * (1.0 - pd) * (1.0 + h) + (1.0 - pd).powi(2) * (0.5 + h - 0.5 * (-self.eta * a).exp());
        (qe / q).clamp(0.0, 1.0)
    }
}

/// Per-intensity quantities in `[mu, nu, omega]` order.
#[derive(Clone, Debug, PartialEq)]
pub struct Bb84Gains {
    pub q: [f64; DECOYS],
    pub e: [f64; DECOYS],
    pub g_zz: [f64; DECOYS],
    pub g_xx: [f64; DECOYS],
    /// A priori key-basis error rate, gain-weighted over intensities.
    pub e_z: f64,
}

pub fn bb84_gain_and_error(params: &ChannelParams, inputs: &ProtocolInputs) -> Bb84Gains {
    let model = Bb84Model::new(params);
    let decoys = inputs.decoys();
    let probs = inputs.decoy_probs();
    let q = decoys.map(|a| model.gain(a));
    let e = decoys.map(|a| model.error_rate(a));
    let g_zz: [f64; DECOYS] = std::array::from_fn(|a| inputs.q_z.powi(2) * probs[a] * q[a]);
    let g_xx: [f64; DECOYS] = std::array::from_fn(|a| inputs.q_x().powi(2) * probs[a] * q[a]);
    let total: f64 = g_zz.iter().sum();
    let e_z = if total > 0.0 { (0..DECOYS).map(|a| e[a] * g_zz[a]).sum::<f64>() / total } else { 0.0 };
    Bb84Gains { q, e, g_zz, g_xx, e_z }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bb84Observables {
    /// Sizes of the per-intensity parts of the sifted key.
    pub z_prime: [f64; DECOYS],
    pub x_sizes: [f64; DECOYS],
    pub x_errors: [f64; DECOYS],
}

pub fn bb84_expected_observables(params: &ChannelParams, inputs: &ProtocolInputs, n: u64, m: u64) -> Bb84Observables {
    let g = bb84_gain_and_error(params, inputs);
    let total: f64 = g.g_zz.iter().sum();
    let (n, m) = (n as f64, m as f64);
    Bb84Observables {
        z_prime: g.g_zz.map(|x| if total > 0.0 { x / total * m } else { 0.0 }),
        x_sizes: g.g_xx.map(|x| x * n),
        x_errors: std::array::from_fn(|a| g.e[a] * g.g_xx[a] * n),
    }
}

/// Multinomial split of `m` over intensities and independent binomials for
/// the X-basis counts.
pub fn bb84_sample_observables<R: Rng + ?Sized>(params: &ChannelParams, inputs: &ProtocolInputs, n: u64, m: u64, rng: &mut R) -> Bb84Observables {
    let g = bb84_gain_and_error(params, inputs);
    let mut obs = Bb84Observables::default();
    let (mut left, mut mass) = (m, g.g_zz.iter().sum::<f64>());
    for a in 0..DECOYS {
        let draw = if a + 1 == DECOYS || mass <= 0.0 { left } else { binomial(left, g.g_zz[a] / mass, rng) };
        obs.z_prime[a] = draw as f64;
        left -= draw;
        mass -= g.g_zz[a];
        let size = binomial(n, g.g_xx[a], rng);
        obs.x_sizes[a] = size as f64;
        obs.x_errors[a] = binomial(size, g.e[a], rng) as f64;
    }
    obs
}
