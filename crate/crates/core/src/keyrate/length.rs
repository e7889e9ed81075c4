use super::SecrecySplit;
use crate::stats::{binary_entropy, chernoff_delta_upper};
use crate::vss::CorruptionModel;

/// `log2(1/(ε̂_cor ε_PA² δ^k))`, summed in the log domain so that large `k`
/// does not underflow.
fn hashing_penalty(hat_eps_cor: f64, split: &SecrecySplit, k: usize) -> f64 {
    -(hat_eps_cor.log2() + 2.0 * split.eps_pa.log2() + k as f64 * split.delta.log2())
}

/// `min_j {h_j - λ_j} - log2(1/(ε̂_cor ε_PA² δ))` before flooring.
pub fn raw_key_length_ac(per_pair: &[(f64, f64)], hat_eps_cor: f64, split: &SecrecySplit) -> f64 {
    let worst = per_pair.iter().map(|(h, lambda)| h - lambda).fold(f64::INFINITY, f64::min);
    worst - hashing_penalty(hat_eps_cor, split, 1)
}

/// Length extractable when at least one pair is honest, clamped at zero.
pub fn key_length_ac(per_pair: &[(f64, f64)], hat_eps_cor: f64, split: &SecrecySplit) -> u64 {
    clamp_floor(raw_key_length_ac(per_pair, hat_eps_cor, split))
}

/// `min_v Σ_{j≠v} {h_j - λ_j} - log2(1/(ε̂_cor ε_PA² δ^(n_q-1)))` before
/// flooring, `n_q = per_pair.len()`.
pub fn raw_key_length_pn(per_pair: &[(f64, f64)], hat_eps_cor: f64, split: &SecrecySplit) -> f64 {
    let n_q = per_pair.len();
    let worst = (0..n_q)
        .map(|v| per_pair.iter().enumerate().filter(|(j, _)| *j != v).map(|(_, (h, lambda))| h - lambda).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    worst - hashing_penalty(hat_eps_cor, split, n_q.saturating_sub(1))
}

/// Length extractable when every pair may leak to its own eavesdropper.
pub fn key_length_pn(per_pair: &[(f64, f64)], hat_eps_cor: f64, split: &SecrecySplit) -> u64 {
    clamp_floor(raw_key_length_pn(per_pair, hat_eps_cor, split))
}

fn clamp_floor(raw: f64) -> u64 {
    if raw.is_finite() && raw > 0.0 {
        raw.floor() as u64
    } else {
        0
    }
}

/// Syndrome length `M f_EC h(E_tol)`.
pub fn ec_leakage(m: f64, f_ec: f64, e_tol: f64) -> f64 {
    m * f_ec * binary_entropy(e_tol)
}

/// Threshold error rate `min{1, E + Δ_U(E M, γ_EC/n_q)/M}` met by every pair
/// except with probability `γ_EC` in total.
pub fn e_tol(expected_qber: f64, m: f64, gamma_ec: f64, n_q: usize) -> f64 {
    (expected_qber + chernoff_delta_upper(expected_qber * m, gamma_ec / n_q as f64) / m).min(1.0)
}

/// Error-verification tag length `ceil(log2(2/ε̂_cor))`.
pub fn ev_tag_bits(hat_eps_cor: f64) -> f64 {
    (2.0 / hat_eps_cor).log2().ceil()
}

/// Lengths of the lab-to-lab messages: one per pair from Alice, one from Bob.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageLengths {
    pub alice: Vec<f64>,
    pub bob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuthCost {
    /// Size `|k|` of every key pool.
    pub pool_bits: f64,
    pub redundancy: usize,
    /// `R² |k|`.
    pub l_au: f64,
}

/// Key-pool size `Σ_j ceil(log2(2|m_A^j|/γ_AU)) + ceil(log2(2|m_B|/γ_AU))`
/// and the total cost over the `R²` pools. Empty messages count as one bit.
pub fn auth_cost(unit_model: CorruptionModel, t_c: usize, messages: &MessageLengths, gamma_au: f64) -> AuthCost {
    let tag = |len: f64| (2.0 * len.max(1.0) / gamma_au).log2().ceil();
    let pool_bits = messages.alice.iter().map(|&len| tag(len)).sum::<f64>() + tag(messages.bob);
    let redundancy = redundancy(unit_model, t_c);
    AuthCost { pool_bits, redundancy, l_au: (redundancy * redundancy) as f64 * pool_bits }
}

/// Copies per share, `R = 2 t_c + 1` for active units and 1 otherwise.
pub(super) fn redundancy(unit_model: CorruptionModel, t_c: usize) -> usize {
    if unit_model.is_active() {
        2 * t_c + 1
    } else {
        1
    }
}

/// Secret bits per transmitted signal, `(l - l_AU)/(n_q N)`.
pub fn key_rate(l: f64, l_au: f64, n_q: usize, n: u64) -> f64 {
    (l - l_au) / (n_q as f64 * n as f64)
}
