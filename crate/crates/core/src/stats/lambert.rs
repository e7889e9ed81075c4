use super::StatsError;

const TOL: f64 = 1e-12;
const MAX_ITER: usize = 100;
const INV_E: f64 = 0.367_879_441_171_442_33;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// Principal branch, `W >= -1`.
    Principal,
    /// Lower branch `W_{-1}`, `W <= -1`, defined on `[-1/e, 0)`.
    Lower,
}

fn halley<F>(w: f64, f: F) -> Result<f64, StatsError>
where
    F: Fn(f64) -> (f64, f64, f64),
{
    halley_bracketed(w, f64::NEG_INFINITY, f64::INFINITY, f)
}

/// Halley iteration that falls back to bisection whenever a step leaves
/// `(lo, hi)`.
fn halley_bracketed<F>(mut w: f64, lo: f64, hi: f64, f: F) -> Result<f64, StatsError>
where
    F: Fn(f64) -> (f64, f64, f64),
{
    for _ in 0..MAX_ITER {
        let (g, d1, d2) = f(w);
        if g == 0.0 {
            return Ok(w);
        }
        let step = 2.0 * g * d1 / (2.0 * d1 * d1 - g * d2);
        let mut next = w - step;
        if !(next > lo && next < hi) {
            next = if next <= lo { 0.5 * (w + lo) } else { 0.5 * (w + hi) };
        }
        if !next.is_finite() {
            break;
        }
        if (next - w).abs() <= TOL * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        w = next;
    }
    Err(StatsError::NoConvergence("Lambert W"))
}

/// Lambert W on the requested branch.
pub fn lambert_w(branch: Branch, z: f64) -> Result<f64, StatsError> {
    if z < -INV_E - 1e-15 || (branch == Branch::Lower && z >= 0.0) || z.is_nan() {
        return Err(StatsError::Domain("Lambert W argument outside the branch domain"));
    }
    let near = (std::f64::consts::E * z + 1.0).max(0.0);
    if near < 1e-30 {
        return Ok(-1.0);
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let p = (2.0 * near).sqrt();
    let guess = match branch {
        Branch::Principal if z < -0.25 => -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p,
        Branch::Principal if z < 3.0 => (1.0 + z).ln() * 0.7,
        Branch::Principal => {
            let l = z.ln();
            l - l.ln()
        }
        Branch::Lower if z < -0.25 => -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p,
        Branch::Lower => {
            let l1 = (-z).ln();
            let l2 = (-l1).ln();
            l1 - l2 + l2 / l1
        }
    };
    let log_form = match branch {
        Branch::Principal => z > 3.0,
        Branch::Lower => z > -0.25,
    };
    if log_form {
        // w + ln|w| = ln|z| is far better conditioned away from the origin.
        let lz = z.abs().ln();
        return halley(guess, |w| (w + w.abs().ln() - lz, 1.0 + 1.0 / w, -1.0 / (w * w)));
    }
    halley(guess, |w| {
        let ew = w.exp();
        let g = w * ew - z;
        (g, ew * (w + 1.0), ew * (w + 2.0))
    })
}

/// `u + ln(1 - u)`, by its series `-sum u^n / n` when `u` is small.
fn u_plus_ln_1m(u: f64) -> f64 {
    if u.abs() < 0.1 {
        let mut term = u;
        let mut sum = 0.0;
        for n in 2..40 {
            term *= u;
            sum -= term / n as f64;
        }
        sum
    } else {
        u + (-u).ln_1p()
    }
}

/// `W(-exp(-1 - s)) + 1` for `s >= 0`, computed without the cancellation
/// that the direct form suffers near the branch point.
///
/// With `u = W + 1` the defining equation becomes `u + ln(1 - u) + s = 0`,
/// which is what the iteration solves.
pub fn lambert_w_shifted(branch: Branch, s: f64) -> Result<f64, StatsError> {
    if s.is_nan() || s < 0.0 {
        return Err(StatsError::Domain("shifted Lambert W needs s >= 0"));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    if s.is_infinite() {
        return Ok(match branch {
            Branch::Principal => 1.0,
            Branch::Lower => f64::NEG_INFINITY,
        });
    }
    let p = (-2.0 * (-s).exp_m1()).sqrt();
    let g = |u: f64| {
        let v = 1.0 - u;
        (u_plus_ln_1m(u) + s, -u / v, -1.0 / (v * v))
    };
    match branch {
        Branch::Principal => {
            let guess = if s < 2.0 { p - p * p / 3.0 + 11.0 / 72.0 * p * p * p } else { -(-s - 1.0).exp_m1() };
            if s > 36.0 {
                // 1 - u = exp(-s - u) is below machine precision.
                return Ok(1.0);
            }
            // 1 - u = exp(-s - u) with u in [0, 1] brackets the root.
            let (lo, hi) = (-(-s).exp_m1(), -(-s - 1.0).exp_m1());
            let guess = guess.clamp(lo, hi);
            halley_bracketed(guess, 0.0, 1.0, g).map(|u| u.clamp(0.0, 1.0))
        }
        Branch::Lower => {
            let guess = if s < 2.0 {
                -p - p * p / 3.0 - 11.0 / 72.0 * p * p * p
            } else {
                -(s + (1.0 + s).ln())
            };
            halley(guess, g).map(|u| u.min(0.0))
        }
    }
}
