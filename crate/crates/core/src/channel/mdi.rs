use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::{i0_sym, ChannelParams};
use crate::inputs::{ProtocolInputs, DECOYS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub fn angle(self) -> f64 {
        match self {
            Basis::Z => 0.0,
            Basis::X => std::f64::consts::FRAC_PI_4,
        }
    }
}

/// Arm of each of the four detectors (1 = right, 2 = left).
pub const DETECTOR_ARM: [u8; 4] = [1, 1, 2, 2];
/// Polarization component seen by each detector (0 = horizontal, 1 = vertical).
pub const DETECTOR_POL: [usize; 4] = [0, 1, 0, 1];
/// Heralding two-click events. The first two (same arm) project onto ψ⁺,
/// the last two (opposite arms) onto ψ⁻.
pub const SUCCESS_EVENTS: [(usize, usize); 4] = [(0, 1), (2, 3), (0, 3), (1, 2)];

/// Four-detector Bell-state measurement at the central node, with each arm
/// carrying half of the total loss.
#[derive(Clone, Debug)]
pub struct MdiModel {
    /// One-sided efficiency.
    pub eta: f64,
    pub p_d: f64,
    pub delta_a: f64,
    pub delta_b: f64,
}

impl MdiModel {
    pub fn new(params: &ChannelParams) -> Self {
        Self {
            eta: params.efficiency(params.loss_db / 2.0),
            p_d: params.p_d,
            delta_a: params.delta_a,
            delta_b: params.delta_b,
        }
    }

    fn rotation(angle: f64) -> [[f64; 2]; 2] {
        let (s, c) = angle.sin_cos();
        [[c, s], [-s, c]]
    }

    /// Real coefficients `(x, y)` with detector amplitude `x_w α + y_w β e^{iγ}`.
    pub fn couplings(&self, basis_a: Basis, basis_b: Basis, i: usize, j: usize) -> ([f64; 4], [f64; 4]) {
        let ta = Self::rotation(basis_a.angle() + self.delta_a);
        let tb = Self::rotation(basis_b.angle() + self.delta_b);
        let scale = (self.eta / 2.0).sqrt();
        let mut x = [0.0; 4];
        let mut y = [0.0; 4];
        for w in 0..4 {
            let k = DETECTOR_POL[w];
            let sign = if DETECTOR_ARM[w] == 1 { -1.0 } else { 1.0 };
            x[w] = scale * ta[i][k];
            y[w] = scale * sign * tb[j][k];
        }
        (x, y)
    }

    /// Phase-averaged probability of each event of [`SUCCESS_EVENTS`] for
    /// amplitudes `alpha`, `beta` and polarization settings `i`, `j` (0 or 1).
    pub fn success_probs(&self, alpha: f64, beta: f64, basis_a: Basis, basis_b: Basis, i: usize, j: usize) -> [f64; 4] {
        let (x, y) = self.couplings(basis_a, basis_b, i, j);
        // Phase average of exp(-Σ_S |ξ_w|²) over detector subset `mask`.
        let no_light = |mask: u8| {
            let (mut mean, mut cross) = (0.0, 0.0);
            for w in (0..4).filter(|w| mask >> w & 1 == 1) {
                mean += alpha * alpha * x[w] * x[w] + beta * beta * y[w] * y[w];
                cross += x[w] * y[w];
            }
            (-mean).exp() * i0_sym(2.0 * alpha * beta * cross)
        };
        let dark = 1.0 - self.p_d;
        SUCCESS_EVENTS.map(|(u, v)| {
            let all = 0b1111u8;
            let others = all & !(1 << u) & !(1 << v);
            let p = dark
                * dark
                * (no_light(others) - dark * (no_light(all & !(1 << u)) + no_light(all & !(1 << v)))
                    + dark * dark * no_light(all));
            p.clamp(0.0, 1.0)
        })
    }

    /// Probability of a heralded success for intensities `a`, `b`, averaged
    /// over the polarization settings.
    pub fn gain(&self, a: f64, b: f64, basis_a: Basis, basis_b: Basis) -> f64 {
        let mut q = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                q += self.success_probs(a.sqrt(), b.sqrt(), basis_a, basis_b, i, j).iter().sum::<f64>();
            }
        }
        q / 4.0
    }

    /// Gain and gain-weighted error `(Q, Q·E)` for matching bases.
    pub fn gain_and_error(&self, a: f64, b: f64, basis: Basis) -> (f64, f64) {
        let (mut q, mut qe) = (0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                let probs = self.success_probs(a.sqrt(), b.sqrt(), basis, basis, i, j);
                for (event, p) in probs.iter().enumerate() {
                    q += p;
                    if is_error(basis, event, i, j) {
                        qe += p;
                    }
                }
            }
        }
        (q / 4.0, qe / 4.0)
    }
}

/// Bob flips his bit on every Z-basis success and on ψ⁻ in the X basis.
pub fn bob_flips(basis: Basis, event: usize) -> bool {
    match basis {
        Basis::Z => true,
        Basis::X => event >= 2,
    }
}

pub(crate) fn is_error(basis: Basis, event: usize, i: usize, j: usize) -> bool {
    (j ^ bob_flips(basis, event) as usize) != i
}

/// Gains `G` (probability per round of the setting combination and a
/// success) and error rates, intensities in `[mu, nu, omega]` order.
#[derive(Clone, Debug, PartialEq)]
pub struct MdiGains {
    pub g_zz: f64,
    pub e_zz: f64,
    pub g_xx: [[f64; DECOYS]; DECOYS],
    pub e_xx: [[f64; DECOYS]; DECOYS],
    /// Alice Z with λ, Bob X with the indexed decoy.
    pub g_zx: [f64; DECOYS],
    pub g_xz: [f64; DECOYS],
}

pub fn mdi_gain_and_error(params: &ChannelParams, inputs: &ProtocolInputs) -> MdiGains {
    let model = MdiModel::new(params);
    let (qz, qx) = (inputs.q_z, inputs.q_x());
    let decoys = inputs.decoys();
    let probs = inputs.decoy_probs();
    let ratio = |q: f64, qe: f64| if q > 0.0 { qe / q } else { 0.0 };

    let (q, qe) = model.gain_and_error(inputs.lambda, inputs.lambda, Basis::Z);
    let mut gains = MdiGains {
        g_zz: qz * qz * q,
        e_zz: ratio(q, qe),
        g_xx: [[0.0; DECOYS]; DECOYS],
        e_xx: [[0.0; DECOYS]; DECOYS],
        g_zx: [0.0; DECOYS],
        g_xz: [0.0; DECOYS],
    };
    for a in 0..DECOYS {
        for b in 0..DECOYS {
            let (q, qe) = model.gain_and_error(decoys[a], decoys[b], Basis::X);
            gains.g_xx[a][b] = qx * qx * probs[a] * probs[b] * q;
            gains.e_xx[a][b] = ratio(q, qe);
        }
        gains.g_zx[a] = qz * qx * probs[a] * model.gain(inputs.lambda, decoys[a], Basis::Z, Basis::X);
        gains.g_xz[a] = qz * qx * probs[a] * model.gain(decoys[a], inputs.lambda, Basis::X, Basis::Z);
    }
    gains
}

/// Key-basis set size and X-basis sizes and error counts of one pair.
/// Counts are real-valued so that expectations fit the same type.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MdiObservables {
    pub z_size: f64,
    pub x_sizes: [[f64; DECOYS]; DECOYS],
    pub x_errors: [[f64; DECOYS]; DECOYS],
}

/// Expected lengths in bits of the announcements made during sifting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MdiMessageSizes {
    /// Alice's intensity labels on successful rounds (2 bits each).
    pub intensities: f64,
    /// Alice's polarization bits on X-basis successes.
    pub bits_x: f64,
    /// Alice's polarization bits on Z-basis successes.
    pub bits_z: f64,
}

pub fn mdi_expected_observables(params: &ChannelParams, inputs: &ProtocolInputs, n: u64) -> (MdiObservables, MdiMessageSizes) {
    let g = mdi_gain_and_error(params, inputs);
    let n = n as f64;
    let mut obs = MdiObservables { z_size: g.g_zz * n, ..Default::default() };
    for a in 0..DECOYS {
        for b in 0..DECOYS {
            obs.x_sizes[a][b] = g.g_xx[a][b] * n;
            obs.x_errors[a][b] = g.e_xx[a][b] * g.g_xx[a][b] * n;
        }
    }
    let sum_xx: f64 = g.g_xx.iter().flatten().sum();
    let sum_zx: f64 = g.g_zx.iter().sum();
    let sum_xz: f64 = g.g_xz.iter().sum();
    let sizes = MdiMessageSizes {
        intensities: (g.g_zz + sum_xx + sum_zx + sum_xz) * 2.0 * n,
        bits_x: (sum_xx + sum_xz) * n,
        bits_z: (g.g_zz + sum_zx) * n,
    };
    (obs, sizes)
}

/// Independent binomial draws with the expected-mode means. Error counts are
/// drawn conditionally on the sampled set size.
pub fn mdi_sample_observables<R: Rng + ?Sized>(params: &ChannelParams, inputs: &ProtocolInputs, n: u64, rng: &mut R) -> MdiObservables {
    let g = mdi_gain_and_error(params, inputs);
    let mut obs = MdiObservables { z_size: binomial(n, g.g_zz, rng) as f64, ..Default::default() };
    for a in 0..DECOYS {
        for b in 0..DECOYS {
            let size = binomial(n, g.g_xx[a][b], rng);
            obs.x_sizes[a][b] = size as f64;
            obs.x_errors[a][b] = binomial(size, g.e_xx[a][b], rng) as f64;
        }
    }
    obs
}

pub(crate) fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    Binomial::new(n, p.min(1.0)).expect("probability in [0,1]").sample(rng)
}
