use std::fmt::Write as _;

use redqkd_core::vss::{CorruptionModel, VssConfig};

use crate::CliError;

/// Minimum post-processing resources per lab for one corruption model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResourceRow {
    pub model: CorruptionModel,
    pub t: usize,
    /// Units per lab.
    pub n_c: usize,
    /// Copies of each share.
    pub redundancy: usize,
    /// Shares each unit manages per QKD module.
    pub shares_per_unit: usize,
}

impl ResourceRow {
    pub fn new(model: CorruptionModel, t: usize) -> Result<Self, CliError> {
        let cfg = VssConfig::new(model, t).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Self { model, t, n_c: cfg.n, redundancy: cfg.redundancy, shares_per_unit: cfg.shares_per_party })
    }

    /// How the row compares with standard VSS, which relies on byzantine
    /// agreement instead of allowing aborts.
    pub fn agreement_note(&self) -> String {
        if !self.model.is_active() {
            return "passive units never deviate, so neither scheme needs byzantine agreement".into();
        }
        let n_std = 3 * self.t + 1;
        let messages = (n_std as f64).powi(self.t as i32);
        format!(
            "standard VSS needs byzantine agreement: n_c >= 3t+1 = {n_std} and about n_c^t = {messages:.3e} messages; the conditional variant aborts instead"
        )
    }
}

pub const HEADER: &str = "model,t,n_c,R,r";

pub fn csv_line(row: &ResourceRow) -> String {
    format!("{},{},{},{},{}", row.model, row.t, row.n_c, row.redundancy, row.shares_per_unit)
}

/// One row plus the agreement note, and for AC the growth of `r` with `t`.
pub fn report(model: CorruptionModel, t: usize) -> Result<String, CliError> {
    let row = ResourceRow::new(model, t)?;
    let mut out = format!("{HEADER}\n{}\n# {}\n", csv_line(&row), row.agreement_note());
    if model == CorruptionModel::AC {
        let growth: Vec<String> = (1..=t.max(6))
            .map(|s| ResourceRow::new(model, s).map(|r| format!("t={s}: r={}", r.shares_per_unit)))
            .collect::<Result<_, _>>()?;
        let _ = writeln!(out, "# r grows exponentially with n_c = 3t+1: {}", growth.join(", "));
    }
    Ok(out)
}

/// Every model for `t` in `ts`, skipping bounds a model does not define.
pub fn table(ts: impl IntoIterator<Item = usize> + Clone) -> String {
    let mut out = format!("{HEADER}\n");
    for model in CorruptionModel::ALL {
        for row in ts.clone().into_iter().filter_map(|t| ResourceRow::new(model, t).ok()) {
            let _ = writeln!(out, "{}", csv_line(&row));
        }
    }
    out
}
