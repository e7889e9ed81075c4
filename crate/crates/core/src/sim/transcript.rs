use std::fmt::Write as _;

use crate::bits::BitString;

/// One delivered (or withheld) message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub phase: String,
    pub kind: &'static str,
    pub from: String,
    pub to: String,
    /// Share index for sharing traffic.
    pub share: Option<usize>,
    /// What the receiver got; `None` when nothing arrived.
    pub payload: Option<BitString>,
}

/// Ordered log of every message of a session.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn push(&mut self, entry: TranscriptEntry) {
        self.entries.push(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Line-oriented form: `phase kind from to share payload`, with `-` for
    /// a missing share index or payload and payloads as `len:hex`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let share = e.share.map_or_else(|| "-".to_string(), |s| s.to_string());
            let payload = e.payload.as_ref().map_or_else(|| "-".to_string(), BitString::to_hex);
            let _ = writeln!(out, "{} {} {} {} {} {}", e.phase, e.kind, e.from, e.to, share, payload);
        }
        out
    }
}
