use std::fmt;

use super::length::redundancy;
use super::{KeyRateError, QkdScheme};
use crate::vss::CorruptionModel;

/// Target correctness and secrecy, the share reserved for authentication
/// failures, and the abort budgets used to provision `N` and `E_tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecurityBudget {
    pub eps_cor: f64,
    pub eps_sec: f64,
    pub eps_au: f64,
    pub gamma_sift: f64,
    pub gamma_ec: f64,
}

impl SecurityBudget {
    /// `ε̂_cor = ε_cor - ε_AU`.
    pub fn hat_eps_cor(&self) -> f64 {
        self.eps_cor - self.eps_au
    }

    /// `ε̂_sec = ε_sec - ε_AU`.
    pub fn hat_eps_sec(&self) -> f64 {
        self.eps_sec - self.eps_au
    }

    pub fn validate(&self) -> Result<(), KeyRateError> {
        let probs = [self.eps_cor, self.eps_sec, self.eps_au, self.gamma_sift, self.gamma_ec];
        if probs.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(KeyRateError::Budget("every term must lie in (0, 1)".into()));
        }
        if self.eps_au >= self.eps_cor || self.eps_au >= self.eps_sec {
            return Err(KeyRateError::Budget("eps_AU must be below eps_cor and eps_sec".into()));
        }
        Ok(())
    }
}

/// Corruption models and device counts of one deployment. The key length
/// depends on the QKD-module model; the authentication cost on the units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Deployment {
    pub qkd_model: CorruptionModel,
    pub unit_model: CorruptionModel,
    /// Corrupted QKD pairs tolerated.
    pub t_q: usize,
    /// Corrupted post-processing units tolerated per lab.
    pub t_c: usize,
    /// QKD pairs in use.
    pub n_q: usize,
}

impl Deployment {
    pub fn new(qkd_model: CorruptionModel, unit_model: CorruptionModel, t_q: usize, t_c: usize, n_q: usize) -> Result<Self, KeyRateError> {
        let d = Self { qkd_model, unit_model, t_q, t_c, n_q };
        match qkd_model {
            CorruptionModel::PN if n_q < 2 => Err(KeyRateError::Deployment("PN needs n_q >= 2".into())),
            CorruptionModel::PN => Ok(d),
            _ if n_q <= t_q => Err(KeyRateError::Deployment(format!("{qkd_model} needs n_q > t_q, got n_q = {n_q}, t_q = {t_q}"))),
            _ => Ok(d),
        }
    }

    /// One trusted module and one trusted unit per lab.
    pub fn honest() -> Self {
        Self::ac(0)
    }

    /// AC model with `t_q = t_c = t`: `n_q = t + 1`, `n_c = 3t + 1`.
    pub fn ac(t: usize) -> Self {
        Self { qkd_model: CorruptionModel::AC, unit_model: CorruptionModel::AC, t_q: t, t_c: t, n_q: t + 1 }
    }

    /// PN model on both device kinds with two QKD pairs and two units.
    pub fn pn() -> Self {
        Self::pn_with(2)
    }

    pub fn pn_with(n_q: usize) -> Self {
        Self { qkd_model: CorruptionModel::PN, unit_model: CorruptionModel::PN, t_q: n_q, t_c: 2, n_q }
    }

    /// Copies per share, `R = 2 t_c + 1` for active units and 1 otherwise.
    pub fn redundancy(&self) -> usize {
        redundancy(self.unit_model, self.t_c)
    }

    /// Per-message authentication error: `ε_AU / ((t_c+1)² (n_q+1))` for
    /// active units, `ε_AU / (n_q+1)` for passive ones.
    pub fn gamma_au(&self, eps_au: f64) -> f64 {
        let messages = (self.n_q + 1) as f64;
        if self.unit_model.is_active() {
            eps_au / ((self.t_c + 1).pow(2) as f64 * messages)
        } else {
            eps_au / messages
        }
    }
}

impl fmt::Display for Deployment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::honest() {
            return write!(f, "honest");
        }
        match self.qkd_model {
            CorruptionModel::PN => write!(f, "PN"),
            m => write!(f, "{m},{}", self.t_q),
        }
    }
}

/// Common value `γ_sec` assigned to every term of the secrecy inequality,
/// including the privacy-amplification error and the slack `δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecrecySplit {
    pub gamma_sec: f64,
    pub eps_pa: f64,
    pub delta: f64,
    /// Number of terms sharing `ε̂_sec`.
    pub terms: usize,
}

/// Counts the terms of the secrecy inequality: `2ε + δ + ε_PA` for AC, AN
/// and PC modules, `(n_q-1)(2ε + δ) + ε_PA` for PN, where `ε` itself is a
/// sum of the scheme's estimation terms.
pub fn split_secrecy_budget(scheme: &dyn QkdScheme, qkd_model: CorruptionModel, n_q: usize, hat_eps_sec: f64) -> SecrecySplit {
    let smooth = scheme.smoothing_terms();
    let terms = match qkd_model {
        CorruptionModel::PN => (n_q.max(2) - 1) * (2 * smooth + 1) + 1,
        _ => 2 * smooth + 2,
    };
    let gamma_sec = hat_eps_sec / terms as f64;
    SecrecySplit { gamma_sec, eps_pa: gamma_sec, delta: gamma_sec, terms }
}
