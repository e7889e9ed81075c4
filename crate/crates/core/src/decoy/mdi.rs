use super::{entropy_bound, DecoyError};
use crate::channel::MdiObservables;
use crate::inputs::{ProtocolInputs, DECOYS};
use crate::stats::{
    chernoff_delta_lower, chernoff_delta_upper, inverse_chernoff_lower, inverse_chernoff_upper, serfling_lambda,
    serfling_upsilon,
};

/// Intensity indices `[a0, a1, b0, b1]` into `[mu, nu, omega]`.
pub type IntensityVector = [usize; 4];

/// The nine `(v, v')` pairs searched for the single-photon yield bound.
pub const V_PAIRS: [(IntensityVector, IntensityVector); 9] = [
    ([0, 1, 0, 1], [0, 2, 0, 2]),
    ([0, 1, 0, 1], [0, 2, 1, 2]),
    ([0, 1, 0, 1], [1, 2, 0, 2]),
    ([0, 1, 0, 1], [1, 2, 1, 2]),
    ([0, 1, 0, 2], [0, 2, 1, 2]),
    ([0, 1, 0, 2], [1, 2, 1, 2]),
    ([0, 2, 0, 1], [1, 2, 0, 2]),
    ([0, 2, 0, 1], [1, 2, 1, 2]),
    ([0, 2, 0, 2], [1, 2, 1, 2]),
];

/// Every `[a0, a1, b0, b1]` with `a0 > a1` and `b0 > b1`.
pub const W_VECTORS: [IntensityVector; 9] = [
    [0, 1, 0, 1],
    [0, 1, 0, 2],
    [0, 1, 1, 2],
    [0, 2, 0, 1],
    [0, 2, 0, 2],
    [0, 2, 1, 2],
    [1, 2, 0, 1],
    [1, 2, 0, 2],
    [1, 2, 1, 2],
];

/// Error terms of the MDI estimation. Every term shares one value in the
/// key-rate analysis, but they are kept separate for bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct MdiBudgets {
    /// Per-set terms for the yield bound.
    pub eps_ab: [[f64; DECOYS]; DECOYS],
    /// Per-set terms for the error bound.
    pub eps_ab_err: [[f64; DECOYS]; DECOYS],
    /// Serfling term, used three times.
    pub eps_s: f64,
    /// Chernoff term, used twice.
    pub eps_c: f64,
}

impl MdiBudgets {
    pub fn common(gamma: f64) -> Self {
        Self { eps_ab: [[gamma; DECOYS]; DECOYS], eps_ab_err: [[gamma; DECOYS]; DECOYS], eps_s: gamma, eps_c: gamma }
    }

    /// Smoothing parameter `3 ε_S + Σ ε_ab + Σ ε'_ab + 2 ε_C`.
    pub fn smooth(&self) -> f64 {
        let sum = |m: &[[f64; DECOYS]; DECOYS]| m.iter().flatten().sum::<f64>();
        3.0 * self.eps_s + sum(&self.eps_ab) + sum(&self.eps_ab_err) + 2.0 * self.eps_c
    }

    /// Number of error terms in [`smooth`](Self::smooth).
    pub const TERMS: usize = 3 + 9 + 9 + 2;
}

/// `τ_nm = (1/n!m!) Σ_{a,b} e^{-(a+b)} a^n b^m q_X² p_a p_b`.
pub fn tau(inputs: &ProtocolInputs, n: i32, m: i32) -> f64 {
    let fact = |k: i32| (1..=k).product::<i32>() as f64;
    let decoys = inputs.decoys();
    let mut sum = 0.0;
    for a in 0..DECOYS {
        for b in 0..DECOYS {
            let (x, y) = (decoys[a], decoys[b]);
            sum += (-(x + y)).exp() * x.powi(n) * y.powi(m) * p_x(inputs, a, b);
        }
    }
    sum / (fact(n) * fact(m))
}

fn p_x(inputs: &ProtocolInputs, a: usize, b: usize) -> f64 {
    let probs = inputs.decoy_probs();
    inputs.q_x().powi(2) * probs[a] * probs[b]
}

/// Rescaling `e^{a+b}/p_{a,b,X}` applied to counts of set `(a, b)`.
fn scale(inputs: &ProtocolInputs, a: usize, b: usize) -> f64 {
    let d = inputs.decoys();
    (d[a] + d[b]).exp() / p_x(inputs, a, b)
}

fn check_order(inputs: &ProtocolInputs) -> Result<(), DecoyError> {
    if inputs.mu > inputs.nu && inputs.nu > inputs.omega && inputs.omega >= 0.0 {
        Ok(())
    } else {
        Err(DecoyError::IntensityOrder("mu > nu > omega >= 0"))
    }
}

/// One evaluated `(v, v')` candidate of the yield bound.
#[derive(Clone, Debug, PartialEq)]
pub struct MdiCandidate {
    pub v: IntensityVector,
    pub v_prime: IntensityVector,
    /// 1 or 2, from the sign test on the intensity sums.
    pub case: u8,
    pub c11: f64,
    pub j: f64,
    pub gamma: f64,
    /// `τ11 (J - Γ) / c11`, or `None` when `c11` is degenerate.
    pub value: Option<f64>,
}

/// Evaluates all nine candidates of the yield bound.
pub fn mdi_candidates(obs: &MdiObservables, inputs: &ProtocolInputs, eps_ab: &[[f64; DECOYS]; DECOYS]) -> Result<Vec<MdiCandidate>, DecoyError> {
    check_order(inputs)?;
    let d = inputs.decoys();
    let tau11 = tau(inputs, 1, 1);
    let mut tilde = [[0.0; DECOYS]; DECOYS];
    let mut gamma_hat = [[0.0; DECOYS]; DECOYS];
    let mut gamma = [[0.0; DECOYS]; DECOYS];
    for a in 0..DECOYS {
        for b in 0..DECOYS {
            let s = scale(inputs, a, b);
            let x = obs.x_sizes[a][b];
            tilde[a][b] = s * x;
            gamma_hat[a][b] = s * inverse_chernoff_lower(x, eps_ab[a][b])?;
            gamma[a][b] = s * inverse_chernoff_upper(x, eps_ab[a][b])?;
        }
    }
    let combo = |m: &[[f64; DECOYS]; DECOYS], v: &IntensityVector| m[v[0]][v[2]] + m[v[1]][v[3]] - m[v[0]][v[3]] - m[v[1]][v[2]];
    let all4 = |m: &[[f64; DECOYS]; DECOYS], v: &IntensityVector| m[v[0]][v[2]] + m[v[1]][v[3]] + m[v[0]][v[3]] + m[v[1]][v[2]];

    let mut out = Vec::with_capacity(V_PAIRS.len());
    for (v, vp) in V_PAIRS {
        let (a0, a1, b0, b1) = (d[v[0]], d[v[1]], d[v[2]], d[v[3]]);
        let (a0p, a1p, b0p, b1p) = (d[vp[0]], d[vp[1]], d[vp[2]], d[vp[3]]);
        let (g_v, g_vp) = (combo(&tilde, &v), combo(&tilde, &vp));
        let case = if (a0 + a1) / (a0p + a1p) > (b0 + b1) / (b0p + b1p) { 1 } else { 2 };
        let (c11, k, kp) = if case == 1 {
            let c = (b0 * b0 - b1 * b1) * (a0 - a1) * (a0p - a1p) * (b0p - b1p)
                - (b0p * b0p - b1p * b1p) * (a0p - a1p) * (a0 - a1) * (b0 - b1);
            (c, (b0 * b0 - b1 * b1) * (a0 - a1), (b0p * b0p - b1p * b1p) * (a0p - a1p))
        } else {
            let c = (a0 - a1) * (b0 - b1) * (a0p - a1p) * (b0p - b1p) * (a0 + a1 - a0p - a1p);
            (c, (a0 * a0 - a1 * a1) * (b0 - b1), (a0p * a0p - a1p * a1p) * (b0p - b1p))
        };
        let j = k * g_vp - kp * g_v;
        let gamma_vv = k * all4(&gamma_hat, &vp) + kp * all4(&gamma, &v);
        let value = (c11.abs() >= 1e-15).then(|| tau11 / c11 * (j - gamma_vv));
        out.push(MdiCandidate { v, v_prime: vp, case, c11, j, gamma: gamma_vv, value });
    }
    Ok(out)
}

/// Lower bound on single-photon successes over all X-basis sets, clamped to
/// `[0, Σ|X^{a,b}|]`.
pub fn mdi_s11x_lower(obs: &MdiObservables, inputs: &ProtocolInputs, eps_ab: &[[f64; DECOYS]; DECOYS]) -> Result<f64, DecoyError> {
    let best = mdi_candidates(obs, inputs, eps_ab)?.iter().filter_map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = obs.x_sizes.iter().flatten().sum();
    Ok(if best.is_finite() { best.floor().clamp(0.0, total) } else { 0.0 })
}

/// Upper bound on single-photon bit errors over all X-basis sets.
pub fn mdi_e11x_upper(obs: &MdiObservables, inputs: &ProtocolInputs, eps_ab_err: &[[f64; DECOYS]; DECOYS]) -> Result<f64, DecoyError> {
    check_order(inputs)?;
    let d = inputs.decoys();
    let tau11 = tau(inputs, 1, 1);
    let mut best = f64::NEG_INFINITY;
    for v in W_VECTORS {
        let term = |a: usize, b: usize| -> Result<(f64, f64, f64), DecoyError> {
            let s = scale(inputs, a, b);
            let e = obs.x_errors[a][b];
            Ok((s * e, s * inverse_chernoff_upper(e, eps_ab_err[a][b])?, s * inverse_chernoff_lower(e, eps_ab_err[a][b])?))
        };
        let (e00, up00, _) = term(v[0], v[2])?;
        let (e11, up11, _) = term(v[1], v[3])?;
        let (e01, _, lo01) = term(v[0], v[3])?;
        let (e10, _, lo10) = term(v[1], v[2])?;
        let f = e00 + e11 - e01 - e10;
        let gamma_v = -up00 - up11 - lo01 - lo10;
        let denom = (d[v[0]] - d[v[1]]) * (d[v[2]] - d[v[3]]);
        if denom.abs() < 1e-15 {
            continue;
        }
        best = best.max(tau11 * (f - gamma_v) / denom);
    }
    Ok(if best.is_finite() { best.ceil().max(0.0) } else { 0.0 })
}

/// Outcome of MDI parameter estimation for one pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PeResultMdi {
    pub s11x_l: f64,
    pub e11x_u: f64,
    /// Chernoff bounds on the numbers of both-single-photon rounds.
    pub n11z_rounds_l: f64,
    pub n11z_rounds_u: f64,
    pub n11x_rounds_l: f64,
    pub n11x_rounds_u: f64,
    pub s11z_l: f64,
    pub n11z_l: f64,
    pub e11z_u: f64,
    /// `None` when `n11z_l = 0`: no key can be certified.
    pub phi11z_u: Option<f64>,
    pub epsilon_smooth: f64,
}

impl PeResultMdi {
    /// `n11Z_L [1 - h(φ11Z_U)]`, or `None` when no key is extractable.
    pub fn entropy_bound(&self) -> Option<f64> {
        entropy_bound(self.n11z_l, self.phi11z_u)
    }
}

/// Moves the X-basis bounds to the sifted key by basis independence of
/// single-photon pairs.
pub fn mdi_transfer_to_z(s11x_l: f64, e11x_u: f64, obs: &MdiObservables, inputs: &ProtocolInputs, budgets: &MdiBudgets) -> PeResultMdi {
    let n = inputs.n as f64;
    let m = inputs.m as f64;
    let p1 = |a: f64| a * (-a).exp();
    let probs = inputs.decoy_probs();
    let mu_z = n * inputs.q_z.powi(2) * p1(inputs.lambda).powi(2);
    let mix: f64 = inputs.decoys().iter().zip(probs).map(|(a, p)| p * p1(*a)).sum();
    let mu_x = n * inputs.q_x().powi(2) * mix.powi(2);
    let upper = |mean: f64| (mean + chernoff_delta_upper(mean, budgets.eps_c)).ceil().min(n);
    let lower = |mean: f64| (mean - chernoff_delta_lower(mean, budgets.eps_c)).floor().max(0.0);
    let (n11z_rounds_l, n11z_rounds_u) = (lower(mu_z), upper(mu_z));
    let (n11x_rounds_l, n11x_rounds_u) = (lower(mu_x), upper(mu_x));

    let s11z_l = if n11x_rounds_u > 0.0 {
        (n11z_rounds_l * s11x_l / n11x_rounds_u
            - (n11z_rounds_l + n11x_rounds_u) * serfling_upsilon(n11z_rounds_l, n11x_rounds_u, budgets.eps_s))
        .floor()
        .max(0.0)
    } else {
        0.0
    };
    let z = obs.z_size;
    let n11z_l = if z > 0.0 && m > 0.0 {
        (m * (s11z_l / z - serfling_lambda(z, m, budgets.eps_s))).floor().clamp(0.0, m)
    } else {
        0.0
    };
    let e11z_u = if n11z_l > 0.0 && s11x_l > 0.0 {
        (n11z_l * e11x_u / s11x_l + (s11x_l + n11z_l) * serfling_upsilon(n11z_l, s11x_l, budgets.eps_s))
            .ceil()
            .min(n11z_l)
    } else {
        n11z_l
    };
    PeResultMdi {
        s11x_l,
        e11x_u,
        n11z_rounds_l,
        n11z_rounds_u,
        n11x_rounds_l,
        n11x_rounds_u,
        s11z_l,
        n11z_l,
        e11z_u,
        phi11z_u: (n11z_l > 0.0).then(|| e11z_u / n11z_l),
        epsilon_smooth: budgets.smooth(),
    }
}

/// Full MDI estimation for one pair.
pub fn mdi_pe(obs: &MdiObservables, inputs: &ProtocolInputs, budgets: &MdiBudgets) -> Result<PeResultMdi, DecoyError> {
    let s11x_l = mdi_s11x_lower(obs, inputs, &budgets.eps_ab)?;
    let e11x_u = mdi_e11x_upper(obs, inputs, &budgets.eps_ab_err)?;
    Ok(mdi_transfer_to_z(s11x_l, e11x_u, obs, inputs, budgets))
}
