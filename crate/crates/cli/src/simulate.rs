use std::fmt::Write as _;

use redqkd_core::keyrate::KeyRateError;
use redqkd_core::protocol::{Outcome, ProtocolError, ProtocolRun, Scenario};

use crate::{CliError, EXIT_ABORT, EXIT_FAILURE, EXIT_OK};

/// Outcome of a simulated session as reported to the user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Completed { keys_equal: bool, key_len: u64, key_hex: Option<String> },
    Aborted { phase: String, origin: String, reason: String },
}

impl Verdict {
    pub fn of(run: &ProtocolRun) -> Self {
        match &run.outcome {
            Outcome::Completed(keys) => Verdict::Completed {
                keys_equal: keys.keys_agree(),
                key_len: keys.key_length.l,
                key_hex: keys.final_key().map(|k| k.to_hex()),
            },
            Outcome::Aborted(a) => Verdict::Aborted {
                phase: a.phase.to_string(),
                origin: a.origin.to_string(),
                reason: a.reason.clone(),
            },
        }
    }

    /// 0 for agreeing keys, 3 for an abort, 1 if the labs disagree.
    pub fn exit_code(&self) -> u8 {
        match self {
            Verdict::Completed { keys_equal: true, .. } => EXIT_OK,
            Verdict::Completed { keys_equal: false, .. } => EXIT_FAILURE,
            Verdict::Aborted { .. } => EXIT_ABORT,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self {
            Verdict::Completed { keys_equal, key_len, key_hex } => {
                let _ = writeln!(out, "verdict: completed");
                let _ = writeln!(out, "keys-equal: {keys_equal}");
                let _ = writeln!(out, "key-length: {key_len}");
                let _ = writeln!(out, "key: {}", key_hex.as_deref().unwrap_or("-"));
            }
            Verdict::Aborted { phase, origin, reason } => {
                let _ = writeln!(out, "verdict: aborted");
                let _ = writeln!(out, "phase: {phase}");
                let _ = writeln!(out, "origin: {origin}");
                let _ = writeln!(out, "reason: {reason}");
            }
        }
        out
    }
}

/// Errors in the scenario itself are usage errors; failures inside the
/// estimation bounds are numerical.
pub fn classify(err: ProtocolError) -> CliError {
    match err {
        ProtocolError::KeyRate(KeyRateError::Stats(_) | KeyRateError::Decoy(_)) | ProtocolError::Bits(_) => {
            CliError::Numerical(err.to_string())
        }
        _ => CliError::Usage(err.to_string()),
    }
}

/// Parses a scenario, applying `key = value` overrides after the file.
pub fn load(text: &str, overrides: &[(String, String)]) -> Result<Scenario, CliError> {
    let mut scenario = Scenario::parse(text).map_err(classify)?;
    for (k, v) in overrides {
        scenario.set(0, k, v).map_err(classify)?;
    }
    Ok(scenario)
}

pub fn simulate(scenario: &Scenario) -> Result<(ProtocolRun, Verdict), CliError> {
    let run = scenario.run().map_err(classify)?;
    let verdict = Verdict::of(&run);
    Ok((run, verdict))
}
