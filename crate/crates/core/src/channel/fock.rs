//! Conditional outcome probabilities for given photon numbers, the
//! photon-number decomposition of the phase-randomized coherent models.

use super::mdi::{Basis, MdiModel, SUCCESS_EVENTS};
use super::{poisson, Bb84Model};

/// Probability that detectors in `mask` see no photon when `n` photons come
/// from Alice and `m` from Bob.
fn no_photon(x: &[f64; 4], y: &[f64; 4], mask: u8, n: usize, m: usize) -> f64 {
    let (mut sx, mut sy, mut c) = (0.0, 0.0, 0.0);
    for w in (0..4).filter(|w| mask >> w & 1 == 1) {
        sx += x[w] * x[w];
        sy += y[w] * y[w];
        c += x[w] * y[w];
    }
    // n! m! Σ_k C^{2k}/(k!)² (1-X)^{n-k}/(n-k)! (1-Y)^{m-k}/(m-k)!, with the
    // factorial ratios accumulated as binomial-like products.
    let mut total = 0.0;
    for k in 0..=n.min(m) {
        let mut coef = 1.0;
        for r in 0..k {
            coef *= ((n - r) * (m - r)) as f64 / ((r + 1) * (r + 1)) as f64;
        }
        total += coef * c.powi(2 * k as i32) * (1.0 - sx).powi((n - k) as i32) * (1.0 - sy).powi((m - k) as i32);
    }
    total.clamp(0.0, 1.0)
}

/// Probability of each event of `SUCCESS_EVENTS` given `n` photons from
/// Alice and `m` from Bob, dark counts included.
pub fn mdi_fock_outcomes(model: &MdiModel, basis_a: Basis, basis_b: Basis, i: usize, j: usize, n: usize, m: usize) -> [f64; 4] {
    let (x, y) = model.couplings(basis_a, basis_b, i, j);
    let dark = 1.0 - model.p_d;
    let silent = |mask: u8| dark.powi(mask.count_ones() as i32) * no_photon(&x, &y, mask, n, m);
    SUCCESS_EVENTS.map(|(u, v)| {
        let all = 0b1111u8;
        let others = all & !(1 << u) & !(1 << v);
        (silent(others) - silent(others | 1 << u) - silent(others | 1 << v) + silent(all)).clamp(0.0, 1.0)
    })
}

/// Click pattern of the two receiver detectors for matching bases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FockClicks {
    pub correct_only: f64,
    pub wrong_only: f64,
    pub both: f64,
}

impl FockClicks {
    pub fn detection(&self) -> f64 {
        self.correct_only + self.wrong_only + self.both
    }

    /// Error probability with double clicks assigned at random.
    pub fn error(&self) -> f64 {
        self.wrong_only + self.both / 2.0
    }
}

pub fn bb84_fock_clicks(model: &Bb84Model, n: usize) -> FockClicks {
    let (s, c) = model.delta.sin_cos();
    let dark = 1.0 - model.p_d;
    let n = n as i32;
    let no_correct = dark * (1.0 - model.eta * c * c).powi(n);
    let no_wrong = dark * (1.0 - model.eta * s * s).powi(n);
    let neither = dark * dark * (1.0 - model.eta).powi(n);
    FockClicks {
        correct_only: no_wrong - neither,
        wrong_only: no_correct - neither,
        both: 1.0 - no_correct - no_wrong + neither,
    }
}

/// Smallest `k` with Poisson(`a`) mass above `k` below `tol`.
pub fn poisson_cutoff(a: f64, tol: f64) -> usize {
    let mut cdf = 0.0;
    for k in 0.. {
        cdf += poisson(a, k);
        if 1.0 - cdf < tol || k > 1000 {
            return k;
        }
    }
    unreachable!()
}
