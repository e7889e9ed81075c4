use std::collections::BTreeMap;

use rand::RngCore;

use super::VssConfig;
use crate::bits::BitString;

/// Originator of a message inside one sharing instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    /// A dealer outside the committee, such as a QKD module.
    Dealer,
    Party(usize),
}

/// Message kinds exchanged by Share and Reconstruct.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VssMessage {
    Deal,
    Echo,
    Reveal,
    AbortOrder,
    AbortRelay,
}

impl VssMessage {
    pub fn label(self) -> &'static str {
        match self {
            Self::Deal => "deal",
            Self::Echo => "echo",
            Self::Reveal => "reveal",
            Self::AbortOrder => "abort-order",
            Self::AbortRelay => "abort-relay",
        }
    }
}

/// Point-to-point delivery between committee members, where adversarial
/// behavior is injected.
pub trait VssNet {
    /// Actively corrupted parties carry no output guarantees.
    fn is_active(&self, party: usize) -> bool;

    /// Returns what `to` receives when `from` sends `payload`; `None` when
    /// nothing arrives.
    fn send(
        &mut self,
        kind: VssMessage,
        from: Endpoint,
        to: usize,
        share: usize,
        payload: &BitString,
    ) -> Option<BitString>;

    /// Whether an active party issues an unwarranted abort order.
    fn false_abort(&mut self, _party: usize) -> bool {
        false
    }
}

/// Network in which everybody follows the protocol.
#[derive(Clone, Copy, Debug, Default)]
pub struct HonestNet;

impl VssNet for HonestNet {
    fn is_active(&self, _party: usize) -> bool {
        false
    }

    fn send(&mut self, _: VssMessage, _: Endpoint, _: usize, _: usize, payload: &BitString) -> Option<BitString> {
        Some(payload.clone())
    }
}

/// Outcome of an aborted sharing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Abort {
    /// Party whose order started the abortion.
    pub origin: usize,
    pub reason: String,
}

/// Local copies of every share, keyed by holder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareTable {
    pub copies: Vec<BTreeMap<usize, BitString>>,
}

impl ShareTable {
    /// Table in which every holder of share `i` has `shares[i]`.
    pub fn from_shares(cfg: &VssConfig, shares: &[BitString]) -> Self {
        assert_eq!(shares.len(), cfg.q);
        let copies = cfg
            .sigma
            .iter()
            .zip(shares)
            .map(|(holders, s)| holders.iter().map(|&p| (p, s.clone())).collect())
            .collect();
        Self { copies }
    }

    pub fn q(&self) -> usize {
        self.copies.len()
    }

    pub fn copy(&self, share: usize, party: usize) -> Option<&BitString> {
        self.copies[share].get(&party)
    }

    /// Applies `f` to every local copy without any communication.
    pub fn map_linear<F: Fn(&BitString) -> BitString>(&self, f: F) -> ShareTable {
        let copies = self.copies.iter().map(|c| c.iter().map(|(&p, s)| (p, f(s))).collect()).collect();
        ShareTable { copies }
    }

    pub fn try_map_linear<E, F: Fn(&BitString) -> Result<BitString, E>>(&self, f: F) -> Result<ShareTable, E> {
        let mut copies = Vec::with_capacity(self.q());
        for c in &self.copies {
            let mut m = BTreeMap::new();
            for (&p, s) in c {
                m.insert(p, f(s)?);
            }
            copies.push(m);
        }
        Ok(ShareTable { copies })
    }

    /// Adds a known public string to the first share only, which shifts the
    /// shared value by that string.
    pub fn add_to_first_share(&mut self, offset: &BitString) {
        for s in self.copies[0].values_mut() {
            s.xor_assign(offset);
        }
    }

    /// Share-wise concatenation: share `k` of the result is share `k` of
    /// each part, in order.
    pub fn concat(parts: &[ShareTable]) -> ShareTable {
        assert!(!parts.is_empty());
        let mut out = parts[0].clone();
        for part in &parts[1..] {
            assert_eq!(part.q(), out.q());
            for (dst, src) in out.copies.iter_mut().zip(&part.copies) {
                for (p, s) in dst.iter_mut() {
                    s.append(&src[p]);
                }
            }
        }
        out
    }
}

/// q-out-of-q XOR splitting: `q - 1` uniform shares and one completing share.
pub fn split<R: RngCore + ?Sized>(m: &BitString, q: usize, rng: &mut R) -> Vec<BitString> {
    assert!(q >= 1);
    let mut shares: Vec<BitString> = (0..q - 1).map(|_| BitString::random(m.len(), rng)).collect();
    let last = shares.iter().fold(m.clone(), |acc, s| acc.xor(s));
    shares.push(last);
    shares
}

/// Two-step abortion: the origin orders everybody to abort and every
/// receiver relays the order to everybody else.
pub fn broadcast_abort(cfg: &VssConfig, origin: usize, net: &mut dyn VssNet) {
    let order = BitString::new();
    for to in (0..cfg.n).filter(|&p| p != origin) {
        net.send(VssMessage::AbortOrder, Endpoint::Party(origin), to, 0, &order);
    }
    for from in (0..cfg.n).filter(|&p| p != origin) {
        for to in (0..cfg.n).filter(|&p| p != from) {
            net.send(VssMessage::AbortRelay, Endpoint::Party(from), to, 0, &order);
        }
    }
}

/// Share: splits `m`, delivers share `i` to `sigma[i]`, then runs pairwise
/// consistency tests inside every `sigma[i]` with more than one member.
///
/// Missing deliveries default to the empty (all-zero) string.
pub fn share<R: RngCore + ?Sized>(
    cfg: &VssConfig,
    dealer: Endpoint,
    m: &BitString,
    net: &mut dyn VssNet,
    rng: &mut R,
) -> Result<ShareTable, Abort> {
    let parts = split(m, cfg.q, rng);
    deal(cfg, dealer, &parts, net)
}

/// Share with caller-provided split, for dealers that pick their own shares.
pub fn deal(cfg: &VssConfig, dealer: Endpoint, parts: &[BitString], net: &mut dyn VssNet) -> Result<ShareTable, Abort> {
    assert_eq!(parts.len(), cfg.q);
    let mut copies: Vec<BTreeMap<usize, BitString>> = Vec::with_capacity(cfg.q);
    for (i, holders) in cfg.sigma.iter().enumerate() {
        let mut held = BTreeMap::new();
        for &p in holders {
            let got = if dealer == Endpoint::Party(p) && !net.is_active(p) {
                parts[i].clone()
            } else {
                net.send(VssMessage::Deal, dealer, p, i, &parts[i]).unwrap_or_default()
            };
            held.insert(p, got);
        }
        copies.push(held);
    }
    let table = ShareTable { copies };
    if let Some(origin) = consistency_tests(cfg, &table, net) {
        broadcast_abort(cfg, origin, net);
        return Err(Abort { origin, reason: "share consistency test failed".into() });
    }
    if let Some(origin) = (0..cfg.n).find(|&p| net.is_active(p) && net.false_abort(p)) {
        broadcast_abort(cfg, origin, net);
        return Err(Abort { origin, reason: "abort order from a corrupted party".into() });
    }
    Ok(table)
}

/// Every pair in each `sigma[i]` exchanges its copy; returns the first
/// non-actively-corrupted party that saw a mismatch.
fn consistency_tests(cfg: &VssConfig, table: &ShareTable, net: &mut dyn VssNet) -> Option<usize> {
    let mut first = None;
    for (i, holders) in cfg.sigma.iter().enumerate() {
        if holders.len() < 2 {
            continue;
        }
        for &from in holders {
            for &to in holders.iter().filter(|&&p| p != from) {
                let got = net.send(VssMessage::Echo, Endpoint::Party(from), to, i, &table.copies[i][&from]);
                if !net.is_active(to) && got.as_ref() != Some(&table.copies[i][&to]) {
                    first.get_or_insert(to);
                }
            }
        }
    }
    first
}

/// Majority vote among copies; ties fall back to an all-zero value.
pub fn majority(votes: &[BitString]) -> (BitString, bool) {
    let mut tally: Vec<(&BitString, usize)> = Vec::new();
    for v in votes {
        match tally.iter_mut().find(|(s, _)| *s == v) {
            Some((_, c)) => *c += 1,
            None => tally.push((v, 1)),
        }
    }
    let best = tally.iter().map(|&(_, c)| c).max().unwrap_or(0);
    let winners: Vec<&BitString> = tally.iter().filter(|&&(_, c)| c == best).map(|&(s, _)| s).collect();
    if winners.len() == 1 {
        (winners[0].clone(), false)
    } else {
        let len = votes.iter().map(BitString::len).max().unwrap_or(0);
        (BitString::zeros(len), true)
    }
}

/// What one party obtains from Reconstruct.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartyOutput {
    /// Majority-decided value of every share.
    pub shares: Vec<BitString>,
    pub value: BitString,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reconstruction {
    /// Outputs of the non-actively-corrupted parties.
    pub outputs: BTreeMap<usize, PartyOutput>,
    /// `(party, share)` pairs decided by a tie.
    pub ties: Vec<(usize, usize)>,
}

impl Reconstruction {
    /// The common value if all parties with guarantees agree.
    pub fn common_value(&self) -> Option<&BitString> {
        let mut values = self.outputs.values().map(|o| &o.value);
        let first = values.next()?;
        values.all(|v| v == first).then_some(first)
    }
}

/// Reconstruct: every holder sends each of its shares to every party, who
/// majority-votes each share and XORs the results.
pub fn reconstruct(cfg: &VssConfig, table: &ShareTable, net: &mut dyn VssNet) -> Reconstruction {
    let mut outputs = BTreeMap::new();
    let mut ties = Vec::new();
    for receiver in 0..cfg.n {
        let mut shares = Vec::with_capacity(cfg.q);
        for (i, holders) in cfg.sigma.iter().enumerate() {
            let votes: Vec<BitString> = holders
                .iter()
                .filter_map(|&from| {
                    let own = &table.copies[i][&from];
                    if from == receiver {
                        Some(own.clone())
                    } else {
                        net.send(VssMessage::Reveal, Endpoint::Party(from), receiver, i, own)
                    }
                })
                .collect();
            let (value, tie) = majority(&votes);
            if tie && !net.is_active(receiver) {
                ties.push((receiver, i));
            }
            shares.push(value);
        }
        if !net.is_active(receiver) {
            let value = shares.iter().fold(BitString::new(), |acc, s| acc.xor(s));
            outputs.insert(receiver, PartyOutput { shares, value });
        }
    }
    Reconstruction { outputs, ties }
}
