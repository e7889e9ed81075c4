use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::{DeploymentConfig, Lab, PartyId, Role, SimError};
use crate::bits::BitString;
use crate::vss::VssMessage;

/// Message families an adversary can target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageClass {
    /// Share deliveries from a dealer.
    Deal,
    /// Copies exchanged in consistency tests.
    Echo,
    /// Shares revealed during Reconstruct.
    Reveal,
    /// Protocol information sent by a QKD module.
    Info,
    /// In-lab forwarding of decisions taken by the first committee.
    Forward,
    /// Messages between the two labs.
    LabToLab,
    Any,
}

impl MessageClass {
    pub const ALL: [MessageClass; 7] =
        [Self::Deal, Self::Echo, Self::Reveal, Self::Info, Self::Forward, Self::LabToLab, Self::Any];

    pub fn of_vss(kind: VssMessage) -> Self {
        match kind {
            VssMessage::Deal => Self::Deal,
            VssMessage::Echo => Self::Echo,
            VssMessage::Reveal => Self::Reveal,
            // Abort orders are modeled as unforgeable.
            VssMessage::AbortOrder | VssMessage::AbortRelay => Self::Forward,
        }
    }

    pub fn matches(self, other: MessageClass) -> bool {
        self == Self::Any || self == other
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Deal => "deal",
            Self::Echo => "echo",
            Self::Reveal => "reveal",
            Self::Info => "info",
            Self::Forward => "forward",
            Self::LabToLab => "l2l",
            Self::Any => "any",
        }
    }
}

impl FromStr for MessageClass {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.label() == s.trim())
            .ok_or_else(|| SimError::Parse(format!("message class {s:?}")))
    }
}

/// How a tampering party alters a payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Flips bit 0, the same lie to every receiver.
    FlipFirst,
    /// Flips an independently drawn bit per message.
    FlipRandom,
    /// Replaces the payload with fresh random bits of the same length.
    Randomize,
    /// Drops the last bit.
    Truncate,
    /// Appends a zero bit.
    Extend,
}

impl Mutation {
    pub const ALL: [Mutation; 5] = [Self::FlipFirst, Self::FlipRandom, Self::Randomize, Self::Truncate, Self::Extend];

    pub fn apply<R: Rng + ?Sized>(self, payload: &BitString, rng: &mut R) -> BitString {
        let mut out = payload.clone();
        match self {
            Self::FlipFirst | Self::FlipRandom if out.is_empty() => out.push(true),
            Self::FlipFirst => out.flip(0),
            Self::FlipRandom => {
                let i = rng.random_range(0..out.len());
                out.flip(i);
            }
            Self::Randomize => out = BitString::random(out.len(), rng),
            Self::Truncate if out.is_empty() => {}
            Self::Truncate => out = out.slice(0, out.len() - 1),
            Self::Extend => out.push(false),
        }
        out
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::FlipFirst => "flip-first",
            Self::FlipRandom => "flip-random",
            Self::Randomize => "randomize",
            Self::Truncate => "truncate",
            Self::Extend => "extend",
        }
    }
}

impl FromStr for Mutation {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.label() == s.trim()).ok_or_else(|| SimError::Parse(format!("mutation {s:?}")))
    }
}

/// Strategy of one corrupted device. Every corrupted device also hands its
/// view to its leak sink.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Behavior {
    /// Follows the protocol and only leaks.
    Leak,
    Tamper { class: MessageClass, mutation: Mutation },
    /// Orders an abort whenever it gets the chance.
    FalseAbort,
    /// Sends nothing.
    Silent,
}

impl Behavior {
    pub fn is_passive(self) -> bool {
        self == Self::Leak
    }
}

/// Syntax: `leak`, `silent`, `false-abort` or `tamper:<class>:<mutation>`.
impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Leak => f.write_str("leak"),
            Self::FalseAbort => f.write_str("false-abort"),
            Self::Silent => f.write_str("silent"),
            Self::Tamper { class, mutation } => write!(f, "tamper:{}:{}", class.label(), mutation.label()),
        }
    }
}

impl FromStr for Behavior {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "leak" => Ok(Self::Leak),
            "false-abort" => Ok(Self::FalseAbort),
            "silent" => Ok(Self::Silent),
            _ => {
                let mut parts = s.split(':');
                match (parts.next(), parts.next(), parts.next(), parts.next()) {
                    (Some("tamper"), Some(class), Some(mutation), None) => {
                        Ok(Self::Tamper { class: class.parse()?, mutation: mutation.parse()? })
                    }
                    _ => Err(SimError::Parse(format!("behavior {s:?}"))),
                }
            }
        }
    }
}

/// Which devices the adversary holds and what each of them does.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdversaryScript {
    pub behaviors: BTreeMap<PartyId, Behavior>,
    /// Whether corrupted devices pool their views in one sink.
    pub collaborative: bool,
}

impl AdversaryScript {
    pub fn honest() -> Self {
        Self::default()
    }

    pub fn with(mut self, party: PartyId, behavior: Behavior) -> Self {
        self.behaviors.insert(party, behavior);
        self
    }

    pub fn collaborative(mut self, on: bool) -> Self {
        self.collaborative = on;
        self
    }

    pub fn is_corrupted(&self, party: PartyId) -> bool {
        self.behaviors.contains_key(&party)
    }

    pub fn behavior(&self, party: PartyId) -> Option<Behavior> {
        self.behaviors.get(&party).copied()
    }

    pub fn is_passive(&self) -> bool {
        self.behaviors.values().all(|b| b.is_passive())
    }

    /// Checks the corruption bounds and that passive layers only leak.
    pub fn validate(&self, cfg: &DeploymentConfig) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::ScriptViolation(msg));
        for (&p, &b) in &self.behaviors {
            if p.lab == Lab::Charles {
                return bad(format!("{p} is untrusted by assumption and cannot be scripted"));
            }
            if !cfg.contains(p) {
                return bad(format!("{p} does not exist in this deployment"));
            }
            let model = cfg.model_of(p);
            if !model.is_active() && !b.is_passive() {
                return bad(format!("{p} follows the {model} model, which only allows leaking, not {b}"));
            }
            if self.collaborative && !model.is_collaborative() {
                return bad(format!("{p} follows the non-collaborative {model} model"));
            }
        }
        let pairs = (0..cfg.n_q)
            .filter(|&j| [Lab::Alice, Lab::Bob].iter().any(|&lab| self.is_corrupted(PartyId::module(lab, j))))
            .count();
        if pairs > cfg.t_q {
            return bad(format!("{pairs} corrupted QKD pairs exceed t_q = {}", cfg.t_q));
        }
        for lab in [Lab::Alice, Lab::Bob] {
            let units = self.behaviors.keys().filter(|p| p.lab == lab && p.role == Role::CpUnit).count();
            if units > cfg.t_c {
                return bad(format!("{units} corrupted units in lab {lab:?} exceed t_c = {}", cfg.t_c));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SinkId {
    /// Pooled view of collaborating devices.
    Shared,
    Own(PartyId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeakRecord {
    /// Device the record came from.
    pub party: PartyId,
    pub phase: String,
    pub label: String,
    pub payload: BitString,
}

/// Views leaked by corrupted devices: one shared sink when they collaborate,
/// otherwise one sink per device, never merged.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LeakSinks {
    collaborative: bool,
    sinks: BTreeMap<SinkId, Vec<LeakRecord>>,
}

impl LeakSinks {
    pub fn for_script(script: &AdversaryScript) -> Self {
        let ids: Vec<SinkId> = if script.behaviors.is_empty() {
            Vec::new()
        } else if script.collaborative {
            vec![SinkId::Shared]
        } else {
            script.behaviors.keys().map(|&p| SinkId::Own(p)).collect()
        };
        Self { collaborative: script.collaborative, sinks: ids.into_iter().map(|id| (id, Vec::new())).collect() }
    }

    pub fn sink_of(&self, party: PartyId) -> SinkId {
        if self.collaborative {
            SinkId::Shared
        } else {
            SinkId::Own(party)
        }
    }

    /// Files a record under the party's sink; ignored for parties without one.
    pub fn record(&mut self, party: PartyId, phase: &str, label: &str, payload: &BitString) {
        let id = self.sink_of(party);
        if let Some(sink) = self.sinks.get_mut(&id) {
            sink.push(LeakRecord { party, phase: phase.to_string(), label: label.to_string(), payload: payload.clone() });
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = SinkId> + '_ {
        self.sinks.keys().copied()
    }

    pub fn sink(&self, id: SinkId) -> &[LeakRecord] {
        self.sinks.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.sinks.values().all(Vec::is_empty)
    }
}
