//! Key-rate sweeps over channel loss, written as versioned CSV.
//!
//! Config files and flags share one flat `key = value` schema:
//!
//! ```text
//! scheme = mdi            # mdi | bb84
//! deployment = ac:1       # honest | ac:<t> | pn | pn:<n_q>
//! module_model = AC       # or set the four fields one by one
//! t_q = 1
//! unit_model = AC
//! t_c = 1
//! n_q = 2                 # defaults to t_q + 1, or the preset's PN pairs
//! loss = 0:60:5           # start:stop:step in dB, or a comma list
//! m = 1000000
//! preset = paper-2020-defaults
//! seed = 0
//! optimize = true         # false evaluates the reference source settings
//! starts = 20
//! max_iters = 300
//! ```

use std::fmt::Write as _;

use rayon::prelude::*;
use redqkd_core::inputs::ProtocolInputs;
use redqkd_core::keyrate::{
    evaluate_provisioned, optimize_inputs, preset_by_name, scheme_by_name, Deployment, KeyLengthResult, KeyRateError,
    OptimizerOptions, Preset, DEFAULT_PRESET,
};
use redqkd_core::vss::{CorruptionModel, VssConfig};

use crate::{key_values, CliError, THREADS_ENV};

pub const CSV_VERSION: &str = "redqkd rate-sweep v1";
pub const CSV_COLUMNS: &str = "loss_db,N,E_tol,l,l_AU,K,status,lambda,mu,nu,omega,q_z,p_mu,p_nu,p_omega";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub scheme: String,
    pub module_model: CorruptionModel,
    pub t_q: usize,
    pub unit_model: CorruptionModel,
    pub t_c: usize,
    /// QKD pairs; derived from the module model when absent.
    pub n_q: Option<usize>,
    /// Loss grid in dB, strictly increasing.
    pub losses: Vec<f64>,
    pub m: u64,
    pub preset: String,
    pub seed: u64,
    pub optimize: bool,
    pub starts: usize,
    pub max_iters: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            scheme: "mdi".into(),
            module_model: CorruptionModel::AC,
            t_q: 0,
            unit_model: CorruptionModel::AC,
            t_c: 0,
            n_q: None,
            losses: parse_grid("0:60:5").expect("valid grid"),
            m: 1_000_000,
            preset: DEFAULT_PRESET.into(),
            seed: 0,
            optimize: true,
            starts: 20,
            max_iters: 300,
        }
    }
}

fn value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Usage(format!("bad value {v:?} for {key}")))
}

/// `start:stop:step` (inclusive) or a comma-separated list of dB values.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("bad loss grid {s:?}; expected start:stop:step or a comma list"));
    let grid: Vec<f64> = if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0 && stop >= start) {
            return Err(bad());
        }
        // Indexing instead of accumulating keeps grid points exact.
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| start + i as f64 * step).collect()
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite() || *x < 0.0) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage(format!("loss grid {s:?} must be nonnegative and strictly increasing")));
    }
    Ok(grid)
}

impl SweepConfig {
    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (line, k, v) in key_values(text)? {
            cfg.set(&k, &v).map_err(|e| CliError::Usage(format!("line {line}: {e}")))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "scheme" => self.scheme = v.to_string(),
            "deployment" => self.set_deployment(v)?,
            "module_model" => self.module_model = value(key, v)?,
            "t_q" => self.t_q = value(key, v)?,
            "unit_model" => self.unit_model = value(key, v)?,
            "t_c" => self.t_c = value(key, v)?,
            "n_q" => self.n_q = Some(value(key, v)?),
            "loss" => self.losses = parse_grid(v)?,
            "m" => self.m = value(key, v)?,
            "preset" => self.preset = v.to_string(),
            "seed" => self.seed = value(key, v)?,
            "optimize" => self.optimize = value(key, v)?,
            "starts" => self.starts = value(key, v)?,
            "max_iters" => self.max_iters = value(key, v)?,
            _ => return Err(CliError::Usage(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    fn set_deployment(&mut self, v: &str) -> Result<(), CliError> {
        let (kind, arg) = v.split_once(':').map_or((v, None), |(k, a)| (k, Some(a)));
        let num = |a: Option<&str>, default: usize| a.map_or(Ok(default), |a| value::<usize>("deployment", a));
        match kind.trim().to_ascii_lowercase().as_str() {
            "honest" if arg.is_none() => self.set_models(CorruptionModel::AC, 0, CorruptionModel::AC, 0, None),
            "ac" => {
                let t = num(arg, 1)?;
                self.set_models(CorruptionModel::AC, t, CorruptionModel::AC, t, None);
            }
            "pn" => {
                let n_q = arg.map(|a| value::<usize>("deployment", a)).transpose()?;
                self.set_models(CorruptionModel::PN, n_q.unwrap_or(2), CorruptionModel::PN, 2, n_q);
            }
            _ => return Err(CliError::Usage(format!("unknown deployment {v:?}; expected honest, ac:<t> or pn[:<n_q>]"))),
        }
        Ok(())
    }

    fn set_models(&mut self, module: CorruptionModel, t_q: usize, unit: CorruptionModel, t_c: usize, n_q: Option<usize>) {
        (self.module_model, self.t_q, self.unit_model, self.t_c, self.n_q) = (module, t_q, unit, t_c, n_q);
    }

    pub fn preset(&self) -> Result<Preset, CliError> {
        preset_by_name(&self.preset).map_err(|e| CliError::Usage(e.to_string()))
    }

    /// The validated deployment of the key-length engine.
    pub fn deployment(&self) -> Result<Deployment, CliError> {
        let preset = self.preset()?;
        let n_q = self.n_q.unwrap_or(if self.module_model == CorruptionModel::PN { preset.pn_pairs } else { self.t_q + 1 });
        VssConfig::new(self.unit_model, self.t_c).map_err(|e| CliError::Usage(e.to_string()))?;
        Deployment::new(self.module_model, self.unit_model, self.t_q, self.t_c, n_q).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        scheme_by_name(&self.scheme).map_err(|e| CliError::Usage(e.to_string()))?;
        self.deployment()?;
        if self.m == 0 {
            return Err(CliError::Usage("m must be positive".into()));
        }
        if self.optimize && self.starts == 0 {
            return Err(CliError::Usage("starts must be positive when optimizing".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RowStatus {
    Key,
    /// Feasible evaluation without a positive rate.
    NoKey,
    /// The point could not be evaluated.
    Error(String),
}

impl RowStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RowStatus::Key => "key",
            RowStatus::NoKey => "no-key",
            RowStatus::Error(_) => "error",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub loss_db: f64,
    pub status: RowStatus,
    /// Source settings with `N` and `E_tol` provisioned.
    pub inputs: Option<ProtocolInputs>,
    pub result: Option<KeyLengthResult>,
}

impl SweepRow {
    pub fn k(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.k)
    }
}

/// Worker count from the environment; zero or unset lets rayon decide.
pub fn threads() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(0),
    }
}

fn evaluate_point(cfg: &SweepConfig, preset: &Preset, deployment: &Deployment, index: usize) -> SweepRow {
    let loss_db = cfg.losses[index];
    let scheme = scheme_by_name(&cfg.scheme).expect("validated scheme");
    let params = preset.channel.with_loss(loss_db);
    let template = scheme.reference_inputs(preset.omega, cfg.m, preset.f_ec);
    let outcome: Result<(ProtocolInputs, KeyLengthResult), KeyRateError> = if cfg.optimize {
        // Each point gets its own stream so the grid can run in any order.
        let options = OptimizerOptions {
            starts: cfg.starts,
            seed: cfg.seed.wrapping_add(index as u64),
            max_iters: cfg.max_iters,
            warm_starts: Vec::new(),
        };
        optimize_inputs(scheme.as_ref(), &params, &template, deployment, &preset.budget, &options).map(|o| (o.inputs, o.result))
    } else {
        evaluate_provisioned(scheme.as_ref(), &params, &template, deployment, &preset.budget)
    };
    match outcome {
        Ok((inputs, result)) => {
            let status = if result.has_key() { RowStatus::Key } else { RowStatus::NoKey };
            SweepRow { loss_db, status, inputs: Some(inputs), result: Some(result) }
        }
        Err(e) => SweepRow { loss_db, status: RowStatus::Error(e.to_string()), inputs: None, result: None },
    }
}

/// One row per loss point, in grid order, evaluated concurrently.
pub fn rate_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, CliError> {
    cfg.validate()?;
    let preset = cfg.preset()?;
    let deployment = cfg.deployment()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads()?)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(|| {
        (0..cfg.losses.len()).into_par_iter().map(|i| evaluate_point(cfg, &preset, &deployment, i)).collect()
    }))
}

/// Versioned CSV: `#` header lines recording the preset and the sweep, the
/// column names, then one row per loss point. Error rows leave numbers empty.
pub fn to_csv(cfg: &SweepConfig, rows: &[SweepRow]) -> Result<String, CliError> {
    let p = cfg.preset()?;
    let d = cfg.deployment()?;
    let (b, c) = (&p.budget, &p.channel);
    let mut out = String::new();
    let _ = writeln!(out, "# {CSV_VERSION}");
    let _ = writeln!(
        out,
        "# preset={} eps_cor={:e} eps_sec={:e} eps_au={:e} gamma_sift={:e} gamma_ec={:e} eta_det={} p_d={:e} delta_a={} delta_b={} omega={:e} f_ec={}",
        p.name, b.eps_cor, b.eps_sec, b.eps_au, b.gamma_sift, b.gamma_ec, c.eta_det, c.p_d, c.delta_a, c.delta_b, p.omega, p.f_ec
    );
    let _ = writeln!(
        out,
        "# scheme={} module_model={} t_q={} unit_model={} t_c={} n_q={} M={} seed={} optimize={} starts={} max_iters={}",
        cfg.scheme, d.qkd_model, d.t_q, d.unit_model, d.t_c, d.n_q, cfg.m, cfg.seed, cfg.optimize, cfg.starts, cfg.max_iters
    );
    let _ = writeln!(out, "{CSV_COLUMNS}");
    for row in rows {
        match (&row.inputs, &row.result) {
            (Some(i), Some(r)) => {
                let _ = writeln!(
                    out,
                    "{},{},{:e},{},{:e},{:e},{},{},{},{},{},{},{},{},{}",
                    row.loss_db, r.n, r.e_tol, r.l, r.l_au, r.k, row.status.label(),
                    i.lambda, i.mu, i.nu, i.omega, i.q_z, i.p_mu, i.p_nu, i.p_omega
                );
            }
            _ => {
                let _ = writeln!(out, "{},,,,,,{},,,,,,,,", row.loss_db, row.status.label());
            }
        }
    }
    Ok(out)
}

/// Whitespace-separated `loss_db K` pairs for gnuplot; error rows are
/// commented out.
pub fn to_gnuplot(rows: &[SweepRow]) -> String {
    let mut out = String::from("# loss_db K\n");
    for row in rows {
        match row.k() {
            Some(k) => {
                let _ = writeln!(out, "{} {:e}", row.loss_db, k);
            }
            None => {
                let _ = writeln!(out, "# {} error", row.loss_db);
            }
        }
    }
    out
}
