use super::lambert::{lambert_w_shifted, Branch};
use super::StatsError;

fn ln_inv(y: f64) -> f64 {
    -y.ln()
}

/// Upper Chernoff deviation `Δ_U(x, y)`.
pub fn chernoff_delta_upper(x: f64, y: f64) -> f64 {
    let l = ln_inv(y);
    if l == 0.0 {
        return 0.0;
    }
    l / 2.0 * (1.0 + (1.0 + 8.0 * x / l).sqrt())
}

/// Lower Chernoff deviation `Δ_L(x, y)`.
pub fn chernoff_delta_lower(x: f64, y: f64) -> f64 {
    (2.0 * x * ln_inv(y)).sqrt()
}

/// Deviations bounding an unknown mean `μ` from one observed count `x`:
/// `x - lower <= μ <= x + upper`, except with probability `eps_l + eps_u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseChernoff {
    /// `Δ̂(x, eps_u)`, from the principal branch.
    pub lower: f64,
    /// `Δ(x, eps_l)`, from the lower branch.
    pub upper: f64,
}

/// `Δ̂(x, y) = x [W_0(-e^{-c}) + 1]` with `c = 1 + ln(1/y)/x`.
pub fn inverse_chernoff_lower(x: f64, y: f64) -> Result<f64, StatsError> {
    let l = ln_inv(y);
    if x <= 0.0 || l == 0.0 {
        return Ok(0.0);
    }
    Ok(x * lambert_w_shifted(Branch::Principal, l / x)?)
}

/// `Δ(x, y) = -x [W_{-1}(-e^{-c}) + 1]`, with `Δ(0, y) = ln(1/y)`.
pub fn inverse_chernoff_upper(x: f64, y: f64) -> Result<f64, StatsError> {
    let l = ln_inv(y);
    if x <= 0.0 {
        return Ok(l);
    }
    if l == 0.0 {
        return Ok(0.0);
    }
    Ok(-x * lambert_w_shifted(Branch::Lower, l / x)?)
}

pub fn inverse_chernoff(x: f64, eps_l: f64, eps_u: f64) -> Result<InverseChernoff, StatsError> {
    Ok(InverseChernoff { lower: inverse_chernoff_lower(x, eps_u)?, upper: inverse_chernoff_upper(x, eps_l)? })
}

/// Serfling deviation `Υ(x, y, z) = sqrt((x+1) ln(1/z) / (2y(x+y)))`.
pub fn serfling_upsilon(x: f64, y: f64, z: f64) -> f64 {
    ((x + 1.0) * ln_inv(z) / (2.0 * y * (x + y))).sqrt()
}

/// Serfling deviation `Λ(x, y, z) = sqrt((x-y+1) ln(1/z) / (2xy))`.
pub fn serfling_lambda(x: f64, y: f64, z: f64) -> f64 {
    ((x - y + 1.0) * ln_inv(z) / (2.0 * x * y)).sqrt()
}

/// Hoeffding deviation `δ(x, y) = sqrt((x/2) ln(1/y))`.
pub fn hoeffding_delta(x: f64, y: f64) -> f64 {
    (x / 2.0 * ln_inv(y)).sqrt()
}

/// Binary entropy in bits, `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// Rounds needed so that a Binomial(N, y) reaches `m` successes except with
/// probability `z`: `ceil(m/y + (ln(1/z)/y)(1 + sqrt(1 + 2m/ln(1/z))))`.
pub fn rounds_for_blocksize(m: f64, y: f64, z: f64) -> Result<f64, StatsError> {
    if y.is_nan() || y <= 0.0 {
        return Err(StatsError::Infeasible("per-round success probability is zero"));
    }
    let l = ln_inv(z);
    if l == 0.0 {
        return Ok((m / y).ceil());
    }
    Ok((m / y + l / y * (1.0 + (1.0 + 2.0 * m / l).sqrt())).ceil())
}
