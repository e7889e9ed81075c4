//! Count-level simulation that tracks which detections came from
//! single-photon emissions, so that decoy bounds can be checked against the
//! quantities they bound.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Hypergeometric};

use super::fock::{bb84_fock_clicks, mdi_fock_outcomes};
use super::mdi::{binomial, is_error, Basis, MdiModel};
use super::{poisson, Bb84Model, Bb84Observables, ChannelParams, MdiObservables};
use crate::inputs::{ProtocolInputs, DECOYS};

/// Single-photon quantities behind one MDI block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MdiTruth {
    /// Rounds with both sides in X (resp. Z) and both emitting one photon.
    pub n11x_rounds: u64,
    pub n11z_rounds: u64,
    /// Single-photon successes and bit errors over all X-basis sets.
    pub s11x: u64,
    pub e11x: u64,
    /// Single-photon successes in the key-basis set.
    pub s11z: u64,
    /// Single-photon successes and phase errors in the sifted subset.
    pub n11z: u64,
    pub e11z: u64,
}

/// Success and error probability per round for one class of settings,
/// split into the single-photon pair and everything else.
struct ClassRates {
    single_emission: f64,
    single_success: f64,
    single_error: f64,
    other_success: f64,
    other_error: f64,
}

/// Draws `(emitted singles, single successes, single errors, all successes,
/// all errors)` for `n` rounds of a class.
fn draw_class<R: Rng + ?Sized>(n: u64, r: &ClassRates, rng: &mut R) -> [u64; 5] {
    let singles = binomial(n, r.single_emission, rng);
    let s_succ = binomial(singles, r.single_success, rng);
    let s_err = binomial(s_succ, ratio(r.single_error, r.single_success), rng);
    let o_succ = binomial(n - singles, r.other_success, rng);
    let o_err = binomial(o_succ, ratio(r.other_error, r.other_success), rng);
    [singles, s_succ, s_err, s_succ + o_succ, s_err + o_err]
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        (a / b).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Splits the coherent-state gain into the (1,1) part and the remainder.
fn mdi_class(model: &MdiModel, a: f64, b: f64, basis: Basis) -> ClassRates {
    let (mut y11, mut e11) = (0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            let probs = mdi_fock_outcomes(model, basis, basis, i, j, 1, 1);
            for (event, p) in probs.iter().enumerate() {
                y11 += p / 4.0;
                if is_error(basis, event, i, j) {
                    e11 += p / 4.0;
                }
            }
        }
    }
    let (q, qe) = model.gain_and_error(a, b, basis);
    let p11 = poisson(a, 1) * poisson(b, 1);
    let rest = 1.0 - p11;
    ClassRates {
        single_emission: p11,
        single_success: y11,
        single_error: e11,
        other_success: if rest > 0.0 { ((q - p11 * y11) / rest).clamp(0.0, 1.0) } else { 0.0 },
        other_error: if rest > 0.0 { ((qe - p11 * e11) / rest).clamp(0.0, 1.0) } else { 0.0 },
    }
}

/// Splits `n` rounds over classes with probabilities `probs`.
fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        let k = binomial(left, ratio(p, mass), rng);
        out.push(k);
        left -= k;
        mass -= p;
    }
    out
}

/// Runs `n` MDI rounds, sifts an `m`-subset of the key-basis set and
/// returns the observables with the single-photon truth, or `None` when the
/// key-basis set is smaller than `m`.
pub fn mdi_tagged_run<R: Rng + ?Sized>(
    params: &ChannelParams,
    inputs: &ProtocolInputs,
    n: u64,
    m: u64,
    rng: &mut R,
) -> Option<(MdiObservables, MdiTruth)> {
    let model = MdiModel::new(params);
    let decoys = inputs.decoys();
    let probs = inputs.decoy_probs();
    let qx = inputs.q_x();

    // Classes: both Z, the nine X-X pairs, then everything mismatched.
    let mut class_probs = vec![inputs.q_z * inputs.q_z];
    for a in 0..DECOYS {
        for b in 0..DECOYS {
            class_probs.push(qx * qx * probs[a] * probs[b]);
        }
    }
    class_probs.push((1.0 - class_probs.iter().sum::<f64>()).max(0.0));
    let counts = multinomial(n, &class_probs, rng);

    let mut obs = MdiObservables::default();
    let mut truth = MdiTruth::default();
    let z = draw_class(counts[0], &mdi_class(&model, inputs.lambda, inputs.lambda, Basis::Z), rng);
    truth.n11z_rounds = z[0];
    truth.s11z = z[1];
    obs.z_size = z[3] as f64;

    let single_x = mdi_class(&model, decoys[0], decoys[0], Basis::X);
    for a in 0..DECOYS {
        for b in 0..DECOYS {
            let x = draw_class(counts[1 + a * DECOYS + b], &mdi_class(&model, decoys[a], decoys[b], Basis::X), rng);
            truth.n11x_rounds += x[0];
            truth.s11x += x[1];
            truth.e11x += x[2];
            obs.x_sizes[a][b] = x[3] as f64;
            obs.x_errors[a][b] = x[4] as f64;
        }
    }

    if z[3] < m {
        return None;
    }
    truth.n11z = sample_hypergeometric(z[3], z[1], m, rng);
    // Phase errors of single-photon pairs in Z follow the X-basis error rate
    // of single-photon pairs, which does not depend on intensities.
    truth.e11z = binomial(truth.n11z, ratio(single_x.single_error, single_x.single_success), rng);
    Some((obs, truth))
}

fn sample_hypergeometric<R: Rng + ?Sized>(population: u64, marked: u64, draws: u64, rng: &mut R) -> u64 {
    if draws == 0 || marked == 0 {
        return 0;
    }
    if marked == population {
        return draws;
    }
    if let Ok(dist) = Hypergeometric::new(population, marked, draws) {
        return dist.sample(rng);
    }
    // The inverse-transform sampler underflows for large populations with a
    // small mode; then min(marked, draws) is small enough to draw an explicit
    // subset and count the hits.
    let (subset, threshold) = if marked <= draws { (marked, draws) } else { (draws, marked) };
    index::sample(rng, population as usize, subset as usize).iter().filter(|&i| (i as u64) < threshold).count() as u64
}

/// Single-photon quantities behind one BB84 block.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bb84Truth {
    pub s1x: u64,
    pub e1x: u64,
    /// Single-photon detections and phase errors in the sifted subset.
    pub n1z: u64,
    pub e1z: u64,
}

fn bb84_class(model: &Bb84Model, a: f64) -> ClassRates {
    let one = bb84_fock_clicks(model, 1);
    let p1 = poisson(a, 1);
    let (q, e) = (model.gain(a), model.error_rate(a));
    let rest = 1.0 - p1;
    ClassRates {
        single_emission: p1,
        single_success: one.detection(),
        single_error: one.error(),
        other_success: if rest > 0.0 { ((q - p1 * one.detection()) / rest).clamp(0.0, 1.0) } else { 0.0 },
        other_error: if rest > 0.0 { ((q * e - p1 * one.error()) / rest).clamp(0.0, 1.0) } else { 0.0 },
    }
}

/// Runs `n` BB84 rounds and sifts an `m`-subset of the key-basis detections.
pub fn bb84_tagged_run<R: Rng + ?Sized>(
    params: &ChannelParams,
    inputs: &ProtocolInputs,
    n: u64,
    m: u64,
    rng: &mut R,
) -> Option<(Bb84Observables, Bb84Truth)> {
    let model = Bb84Model::new(params);
    let decoys = inputs.decoys();
    let probs = inputs.decoy_probs();
    let (qz, qx) = (inputs.q_z, inputs.q_x());

    let mut class_probs: Vec<f64> = (0..DECOYS).map(|a| qz * qz * probs[a]).collect();
    class_probs.extend((0..DECOYS).map(|a| qx * qx * probs[a]));
    class_probs.push((1.0 - class_probs.iter().sum::<f64>()).max(0.0));
    let counts = multinomial(n, &class_probs, rng);

    let mut obs = Bb84Observables::default();
    let mut truth = Bb84Truth::default();
    // Key-basis detections per intensity, split into single-photon and other.
    let mut z_parts = Vec::with_capacity(2 * DECOYS);
    for a in 0..DECOYS {
        let rates = bb84_class(&model, decoys[a]);
        let z = draw_class(counts[a], &rates, rng);
        z_parts.push(z[1]);
        z_parts.push(z[3] - z[1]);
        let x = draw_class(counts[DECOYS + a], &rates, rng);
        truth.s1x += x[1];
        truth.e1x += x[2];
        obs.x_sizes[a] = x[3] as f64;
        obs.x_errors[a] = x[4] as f64;
    }
    let z_total: u64 = z_parts.iter().sum();
    if z_total < m {
        return None;
    }
    // Multivariate hypergeometric draw of the sifted subset.
    let (mut population, mut left) = (z_total, m);
    let mut picked = vec![0; z_parts.len()];
    for (k, &part) in z_parts.iter().enumerate() {
        let take = sample_hypergeometric(population, part, left, rng);
        picked[k] = take;
        population -= part;
        left -= take;
    }
    for a in 0..DECOYS {
        obs.z_prime[a] = (picked[2 * a] + picked[2 * a + 1]) as f64;
        truth.n1z += picked[2 * a];
    }
    let one = bb84_fock_clicks(&model, 1);
    truth.e1z = binomial(truth.n1z, ratio(one.error(), one.detection()), rng);
    Some((obs, truth))
}
