use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{evaluate_provisioned, Deployment, KeyLengthResult, KeyRateError, QkdScheme, SecurityBudget};
use crate::channel::ChannelParams;
use crate::inputs::ProtocolInputs;

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerOptions {
    /// Random feasible starting points.
    pub starts: usize,
    pub seed: u64,
    pub max_iters: u64,
    /// Extra starting points tried before the random ones, such as the
    /// optimum of a neighbouring loss value.
    pub warm_starts: Vec<ProtocolInputs>,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { starts: 20, seed: 0, max_iters: 300, warm_starts: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimized {
    /// Best inputs with `N` and `E_tol` provisioned.
    pub inputs: ProtocolInputs,
    pub result: KeyLengthResult,
    /// Rates at the random starting points, for the local-search contract.
    pub start_rates: Vec<f64>,
    /// False when no point yields a positive rate.
    pub feasible: bool,
}

const LO: f64 = 0.02;

fn lerp(lo: f64, hi: f64, x: f64) -> f64 {
    lo + (hi - lo) * x.clamp(0.0, 1.0)
}

fn unlerp(lo: f64, hi: f64, v: f64) -> f64 {
    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Maps the unit box onto feasible inputs: `mu`, the fraction placing `nu`
/// strictly between `omega` and `mu - omega`, `q_Z`, `p_mu`, the share of
/// the remaining decoy probability given to `nu`, and `lambda` when used.
#[derive(Clone, Copy)]
struct Encoding<'a> {
    template: &'a ProtocolInputs,
    lambda: bool,
}

impl Encoding<'_> {
    fn dim(&self) -> usize {
        if self.lambda {
            6
        } else {
            5
        }
    }

    fn decode(&self, x: &[f64]) -> ProtocolInputs {
        let omega = self.template.omega;
        let mu = lerp(LO.max(3.0 * omega), 1.0, x[0]);
        let nu = omega + (mu - 2.0 * omega) * lerp(LO, 1.0 - LO, x[1]);
        let p_mu = lerp(LO, 1.0 - 2.0 * LO, x[3]);
        let p_nu = (1.0 - p_mu) * lerp(LO, 1.0 - LO, x[4]);
        ProtocolInputs {
            lambda: if self.lambda { lerp(LO, 1.0, x[5]) } else { self.template.lambda },
            mu,
            nu,
            q_z: lerp(LO, 1.0 - LO, x[2]),
            p_mu,
            p_nu,
            p_omega: 1.0 - p_mu - p_nu,
            ..self.template.clone()
        }
    }

    fn encode(&self, inputs: &ProtocolInputs) -> Vec<f64> {
        let omega = self.template.omega;
        let mu = inputs.mu;
        let mut x = vec![
            unlerp(LO.max(3.0 * omega), 1.0, mu),
            unlerp(LO, 1.0 - LO, (inputs.nu - omega) / (mu - 2.0 * omega)),
            unlerp(LO, 1.0 - LO, inputs.q_z),
            unlerp(LO, 1.0 - 2.0 * LO, inputs.p_mu),
            unlerp(LO, 1.0 - LO, inputs.p_nu / (1.0 - inputs.p_mu)),
        ];
        if self.lambda {
            x.push(unlerp(LO, 1.0, inputs.lambda));
        }
        x
    }
}

#[derive(Clone, Copy)]
struct Objective<'a> {
    scheme: &'a dyn QkdScheme,
    params: &'a ChannelParams,
    deployment: &'a Deployment,
    budget: &'a SecurityBudget,
    encoding: Encoding<'a>,
    /// Scale bringing the cost to order one for the simplex tolerance.
    scale: f64,
}

impl Objective<'_> {
    fn evaluate(&self, x: &[f64]) -> Option<(ProtocolInputs, KeyLengthResult)> {
        evaluate_provisioned(self.scheme, self.params, &self.encoding.decode(x), self.deployment, self.budget).ok()
    }

    /// Rate before flooring and clamping `l`, so that the search still sees
    /// a slope where no key is extractable yet.
    fn smooth_rate(r: &KeyLengthResult) -> f64 {
        (r.l_raw - r.l_au) / (r.per_pair_h.len() as f64 * r.n as f64)
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> Result<f64, ArgminError> {
        Ok(match self.evaluate(x) {
            Some((_, r)) if Self::smooth_rate(&r).is_finite() => -Self::smooth_rate(&r) / self.scale,
            _ => f64::MAX,
        })
    }
}

type Candidate = (ProtocolInputs, KeyLengthResult, f64);

/// Keeps the candidate with the larger rate, ties broken by the smooth rate,
/// and returns the candidate's rate.
fn consider(candidate: Option<(ProtocolInputs, KeyLengthResult)>, best: &mut Option<Candidate>) -> f64 {
    let Some((inputs, result)) = candidate else { return f64::NEG_INFINITY };
    let smooth = Objective::smooth_rate(&result);
    let k = result.k;
    let better = match best {
        None => true,
        Some((_, b, b_smooth)) => (k, smooth) > (b.k, *b_smooth),
    };
    if better {
        *best = Some((inputs, result, smooth));
    }
    k
}

fn local_search(base: &Objective, start: &[f64], step: f64, scale: Option<f64>, max_iters: u64) -> Option<Vec<f64>> {
    let mut simplex = vec![start.to_vec()];
    for d in 0..start.len() {
        let mut v = start.to_vec();
        v[d] = if v[d] > 0.5 { v[d] - step } else { v[d] + step };
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-10).ok()?;
    let problem = Objective { scale: scale.unwrap_or(1.0), ..*base };
    let run = Executor::new(problem, solver).configure(|s| s.max_iters(max_iters)).run().ok()?;
    run.state().get_best_param().map(|x| x.iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// Multi-start Nelder-Mead over the box-constrained source settings,
/// maximizing the key rate. `template` fixes `omega`, `M` and `f_EC`.
pub fn optimize_inputs(
    scheme: &dyn QkdScheme,
    params: &ChannelParams,
    template: &ProtocolInputs,
    deployment: &Deployment,
    budget: &SecurityBudget,
    options: &OptimizerOptions,
) -> Result<Optimized, KeyRateError> {
    let encoding = Encoding { template, lambda: scheme.uses_lambda() };
    let dim = encoding.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let reference = scheme.reference_inputs(template.omega, template.m, template.f_ec);
    let mut starts: Vec<Vec<f64>> = options.warm_starts.iter().chain([&reference]).map(|s| encoding.encode(s)).collect();
    let warm = starts.len();
    starts.extend((0..options.starts).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect::<Vec<f64>>()));

    let base = Objective { scheme, params, deployment, budget, encoding, scale: 1.0 };
    let mut best: Option<Candidate> = None;
    let mut start_rates = Vec::new();
    for (i, start) in starts.iter().enumerate() {
        let initial = base.evaluate(start);
        let scale = initial.as_ref().map(|(_, r)| Objective::smooth_rate(r).abs()).filter(|s| s.is_finite() && *s > 0.0);
        let rate = consider(initial, &mut best);
        if i >= warm {
            start_rates.push(rate);
        }

        if let Some(x) = local_search(&base, start, 0.15, scale, options.max_iters) {
            consider(base.evaluate(&x), &mut best);
        }
    }

    // Polish the winner with shrinking restarts, which helps the simplex
    // escape the slow valleys it tends to stall in.
    for step in [0.05, 0.01] {
        let Some((inputs, result, _)) = &best else { break };
        let scale = Some(Objective::smooth_rate(result).abs()).filter(|s| s.is_finite() && *s > 0.0);
        if let Some(x) = local_search(&base, &encoding.encode(inputs), step, scale, options.max_iters) {
            consider(base.evaluate(&x), &mut best);
        }
    }

    let (inputs, result, _) = best.ok_or_else(|| KeyRateError::Inputs("no start point could be evaluated".into()))?;
    let feasible = result.has_key();
    Ok(Optimized { inputs, result, start_rates, feasible })
}
