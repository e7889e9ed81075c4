//! Randomized adversary for property tests of Share and Reconstruct.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Endpoint, VssConfig, VssMessage, VssNet};
use crate::bits::BitString;

/// Strategy of one actively corrupted party.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tactic {
    /// Follows the protocol.
    Mimic,
    /// Echoes random strings in consistency tests.
    RandomEcho,
    /// Reveals a different random corruption of its copy to every receiver.
    LieOnReveal,
    /// Sends nothing at all.
    Silent,
    /// Orders an abort after the consistency tests.
    FalseAbort,
    /// Echoes what the honest holders received rather than its own copy.
    EchoHonestCopy,
}

impl Tactic {
    const ALL: [Tactic; 6] =
        [Self::Mimic, Self::RandomEcho, Self::LieOnReveal, Self::Silent, Self::FalseAbort, Self::EchoHonestCopy];
}

/// How a corrupted dealer distributes shares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DealerTactic {
    Honest,
    /// Same altered share to every holder.
    ConsistentLie,
    /// Independent random share to every holder.
    Equivocate,
    /// Honest share to honest holders, altered share to corrupted ones.
    SplitView,
    /// Withholds a share from one holder.
    Withhold,
}

impl DealerTactic {
    const ALL: [DealerTactic; 5] =
        [Self::Honest, Self::ConsistentLie, Self::Equivocate, Self::SplitView, Self::Withhold];
}

pub struct FuzzNet {
    pub active: BTreeSet<usize>,
    pub tactics: BTreeMap<usize, Tactic>,
    /// Tactic of a corrupted dealer; `None` for an honest one.
    pub dealer: Option<DealerTactic>,
    honest_view: BTreeMap<usize, BitString>,
    withheld: BTreeMap<usize, usize>,
    rng: ChaCha8Rng,
}

impl FuzzNet {
    /// Draws up to `cfg.t` active parties (none for passive models), their
    /// tactics, and whether the external dealer is corrupted.
    pub fn random(cfg: &VssConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (active, dealer) = if cfg.model.is_active() {
            let k = rng.random_range(0..=cfg.t.min(cfg.n));
            let active: BTreeSet<usize> = (0..cfg.n).choose_multiple(&mut rng, k).into_iter().collect();
            let dealer = rng.random_bool(0.5).then(|| DealerTactic::ALL[rng.random_range(0..DealerTactic::ALL.len())]);
            (active, dealer)
        } else {
            (BTreeSet::new(), None)
        };
        let tactics = active.iter().map(|&p| (p, Tactic::ALL[rng.random_range(0..Tactic::ALL.len())])).collect();
        Self { active, tactics, dealer, honest_view: BTreeMap::new(), withheld: BTreeMap::new(), rng }
    }

    pub fn dealer_is_honest(&self) -> bool {
        matches!(self.dealer, None | Some(DealerTactic::Honest))
    }

    fn corrupt(&mut self, s: &BitString) -> BitString {
        let mut out = s.clone();
        if out.is_empty() {
            out.push(true);
        } else {
            let i = self.rng.random_range(0..out.len());
            out.flip(i);
        }
        out
    }

    fn dealt(&mut self, tactic: DealerTactic, to: usize, share: usize, payload: &BitString) -> Option<BitString> {
        match tactic {
            DealerTactic::Honest => Some(payload.clone()),
            DealerTactic::ConsistentLie => {
                let mut s = payload.clone();
                if s.is_empty() {
                    s.push(true);
                } else {
                    s.flip(0);
                }
                Some(s)
            }
            DealerTactic::Equivocate => Some(BitString::random(payload.len(), &mut self.rng)),
            DealerTactic::SplitView => {
                if self.active.contains(&to) {
                    Some(self.corrupt(payload))
                } else {
                    self.honest_view.insert(share, payload.clone());
                    Some(payload.clone())
                }
            }
            DealerTactic::Withhold => {
                let victim = *self.withheld.entry(share).or_insert(to);
                (victim != to).then(|| payload.clone())
            }
        }
    }
}

impl VssNet for FuzzNet {
    fn is_active(&self, party: usize) -> bool {
        self.active.contains(&party)
    }

    fn send(
        &mut self,
        kind: VssMessage,
        from: Endpoint,
        to: usize,
        share: usize,
        payload: &BitString,
    ) -> Option<BitString> {
        let sender = match from {
            Endpoint::Dealer => {
                return match self.dealer {
                    Some(t) => self.dealt(t, to, share, payload),
                    None => Some(payload.clone()),
                };
            }
            Endpoint::Party(p) => p,
        };
        let Some(&tactic) = self.tactics.get(&sender) else {
            return Some(payload.clone());
        };
        match (kind, tactic) {
            (_, Tactic::Silent) => None,
            (VssMessage::Deal, _) => {
                let dt = DealerTactic::ALL[self.rng.random_range(0..DealerTactic::ALL.len())];
                self.dealt(dt, to, share, payload)
            }
            (VssMessage::Echo, Tactic::RandomEcho) => Some(BitString::random(payload.len(), &mut self.rng)),
            (VssMessage::Echo, Tactic::EchoHonestCopy) => {
                Some(self.honest_view.get(&share).cloned().unwrap_or_else(|| payload.clone()))
            }
            (VssMessage::Reveal, Tactic::LieOnReveal) => Some(self.corrupt(payload)),
            _ => Some(payload.clone()),
        }
    }

    fn false_abort(&mut self, party: usize) -> bool {
        self.tactics.get(&party) == Some(&Tactic::FalseAbort)
    }
}
