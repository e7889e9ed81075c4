//! Round-by-round classical records, as the QKD modules would hand them to
//! post-processing. Only rounds with a detection are kept.

use rand::Rng;

use super::mdi::{bob_flips, Basis, MdiModel};
use super::{Bb84Model, ChannelParams};
use crate::inputs::{ProtocolInputs, DECOYS};

/// Basis and intensity chosen for one round. `X(k)` uses decoy `k` of
/// `[mu, nu, omega]`; the MDI key basis uses `lambda`, BB84 draws a decoy
/// in both bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Setting {
    Z(usize),
    X(usize),
}

impl Setting {
    pub fn basis(self) -> Basis {
        match self {
            Setting::Z(_) => Basis::Z,
            Setting::X(_) => Basis::X,
        }
    }

    pub fn intensity_index(self) -> usize {
        match self {
            Setting::Z(k) | Setting::X(k) => k,
        }
    }

    fn slot(self) -> usize {
        match self {
            Setting::Z(_) => 0,
            Setting::X(k) => 1 + k,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdiRound {
    pub index: u64,
    pub alice: Setting,
    pub bob: Setting,
    pub alice_bit: bool,
    /// Bob's bit after the flip implied by the announced Bell state.
    pub bob_bit: bool,
    /// Index into `SUCCESS_EVENTS`.
    pub event: usize,
}

fn draw_mdi_setting<R: Rng + ?Sized>(inputs: &ProtocolInputs, rng: &mut R) -> Setting {
    if rng.random_bool(inputs.q_z.clamp(0.0, 1.0)) {
        return Setting::Z(0);
    }
    Setting::X(draw_decoy(inputs, rng))
}

fn draw_decoy<R: Rng + ?Sized>(inputs: &ProtocolInputs, rng: &mut R) -> usize {
    let probs = inputs.decoy_probs();
    let mut u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    for (k, p) in probs.iter().enumerate() {
        if u < *p {
            return k;
        }
        u -= p;
    }
    DECOYS - 1
}

/// Simulates `n` MDI rounds of one pair and returns the successful ones.
pub fn sample_mdi_rounds<R: Rng + ?Sized>(params: &ChannelParams, inputs: &ProtocolInputs, n: u64, rng: &mut R) -> Vec<MdiRound> {
    let model = MdiModel::new(params);
    let decoys = inputs.decoys();
    let amplitude = |s: Setting| match s {
        Setting::Z(_) => inputs.lambda.sqrt(),
        Setting::X(k) => decoys[k].sqrt(),
    };
    let settings: Vec<Setting> = std::iter::once(Setting::Z(0)).chain((0..DECOYS).map(Setting::X)).collect();
    // Outcome probabilities indexed by [alice slot][bob slot][i][j].
    let mut table = vec![[[[[0.0; 4]; 2]; 2]; 4]; 4];
    for &a in &settings {
        for &b in &settings {
            for (i, row) in table[a.slot()][b.slot()].iter_mut().enumerate() {
                for (j, cell) in row.iter_mut().enumerate() {
                    *cell = model.success_probs(amplitude(a), amplitude(b), a.basis(), b.basis(), i, j);
                }
            }
        }
    }

    let mut rounds = Vec::new();
    for index in 0..n {
        let (alice, bob) = (draw_mdi_setting(inputs, rng), draw_mdi_setting(inputs, rng));
        let (i, j) = (rng.random_range(0..2usize), rng.random_range(0..2usize));
        let probs = &table[alice.slot()][bob.slot()][i][j];
        let mut u: f64 = rng.random();
        let Some(event) = probs.iter().position(|p| {
            let hit = u < *p;
            u -= p;
            hit
        }) else {
            continue;
        };
        let flip = alice.basis() == bob.basis() && bob_flips(bob.basis(), event);
        rounds.push(MdiRound { index, alice, bob, alice_bit: i == 1, bob_bit: (j == 1) ^ flip, event });
    }
    rounds
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bb84Round {
    pub index: u64,
    pub alice: Setting,
    pub bob_basis: Basis,
    pub alice_bit: bool,
    pub bob_bit: bool,
}

/// One BB84 transmission, detected or not.
#[derive(Clone, Debug, PartialEq)]
pub struct Bb84Transmission {
    pub alice: Setting,
    pub alice_bit: bool,
    /// Bob's basis, drawn for every round.
    pub bob_basis: Basis,
    /// Bob's bit when he detected the pulse.
    pub bob_bit: Option<bool>,
}

/// Simulates all `n` BB84 rounds of one pair.
pub fn sample_bb84_transmissions<R: Rng + ?Sized>(params: &ChannelParams, inputs: &ProtocolInputs, n: u64, rng: &mut R) -> Vec<Bb84Transmission> {
    let model = Bb84Model::new(params);
    let decoys = inputs.decoys();
    let gains = decoys.map(|a| model.gain(a));
    let errors = decoys.map(|a| model.error_rate(a));
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let key = rng.random_bool(inputs.q_z.clamp(0.0, 1.0));
        let k = draw_decoy(inputs, rng);
        let alice = if key { Setting::Z(k) } else { Setting::X(k) };
        let bob_basis = if rng.random_bool(inputs.q_z.clamp(0.0, 1.0)) { Basis::Z } else { Basis::X };
        let alice_bit = rng.random_bool(0.5);
        let bob_bit = rng.random_bool(gains[k]).then(|| {
            if bob_basis == alice.basis() {
                alice_bit ^ rng.random_bool(errors[k])
            } else {
                rng.random_bool(0.5)
            }
        });
        out.push(Bb84Transmission { alice, alice_bit, bob_basis, bob_bit });
    }
    out
}

/// Simulates `n` BB84 rounds of one pair and returns those Bob detected.
pub fn sample_bb84_rounds<R: Rng + ?Sized>(params: &ChannelParams, inputs: &ProtocolInputs, n: u64, rng: &mut R) -> Vec<Bb84Round> {
    sample_bb84_transmissions(params, inputs, n, rng)
        .into_iter()
        .enumerate()
        .filter_map(|(index, t)| {
            let bob_bit = t.bob_bit?;
            Some(Bb84Round { index: index as u64, alice: t.alice, bob_basis: t.bob_basis, alice_bit: t.alice_bit, bob_bit })
        })
        .collect()
}
