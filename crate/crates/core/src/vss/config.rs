use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;

use super::VssError;

/// How corrupted devices behave and whether they pool what they learn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorruptionModel {
    /// Active and collaborative.
    AC,
    /// Active and non-collaborative.
    AN,
    /// Passive and collaborative.
    PC,
    /// Passive and non-collaborative.
    PN,
}

impl CorruptionModel {
    pub const ALL: [CorruptionModel; 4] = [Self::AC, Self::AN, Self::PC, Self::PN];

    pub fn is_active(self) -> bool {
        matches!(self, Self::AC | Self::AN)
    }

    pub fn is_collaborative(self) -> bool {
        matches!(self, Self::AC | Self::PC)
    }

    /// Smallest corruption bound the model is defined for.
    pub fn min_t(self) -> usize {
        if self.is_collaborative() {
            0
        } else {
            2
        }
    }
}

impl fmt::Display for CorruptionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for CorruptionModel {
    type Err = VssError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "AC" => Ok(Self::AC),
            "AN" => Ok(Self::AN),
            "PC" => Ok(Self::PC),
            "PN" => Ok(Self::PN),
            _ => Err(VssError::UnknownModel(s.to_string())),
        }
    }
}

/// Share allocation for one corruption model and bound `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VssConfig {
    pub model: CorruptionModel,
    pub t: usize,
    pub n: usize,
    pub q: usize,
    /// `sigma[i]` lists, in ascending order, the parties holding share `i`.
    pub sigma: Vec<Vec<usize>>,
    /// Copies of each share, `|sigma[i]|`.
    pub redundancy: usize,
    /// Shares each party manages per dealer.
    pub shares_per_party: usize,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl VssConfig {
    /// Minimal settings for `model` tolerating `t` corrupted parties.
    pub fn new(model: CorruptionModel, t: usize) -> Result<Self, VssError> {
        if t < model.min_t() {
            return Err(VssError::InvalidBound { model, t });
        }
        let (n, sigma): (usize, Vec<Vec<usize>>) = match model {
            CorruptionModel::AC => {
                let n = 3 * t + 1;
                // T_i runs over the t-subsets in lexicographic order; sigma_i is its complement.
                let sigma = (0..n)
                    .combinations(t)
                    .map(|excluded| (0..n).filter(|p| !excluded.contains(p)).collect())
                    .collect();
                (n, sigma)
            }
            CorruptionModel::AN => {
                let n = 2 * t + 2;
                (n, (0..n).map(|i| (0..n).filter(|&p| p != i).collect()).collect())
            }
            CorruptionModel::PC => {
                let n = t + 1;
                (n, (0..n).map(|i| vec![i]).collect())
            }
            CorruptionModel::PN => (2, vec![vec![0], vec![1]]),
        };
        let q = sigma.len();
        let redundancy = sigma[0].len();
        let shares_per_party = sigma.iter().filter(|s| s.contains(&0)).count();
        Ok(Self { model, t, n, q, sigma, redundancy, shares_per_party })
    }

    pub fn holds(&self, party: usize, share: usize) -> bool {
        self.sigma[share].binary_search(&party).is_ok()
    }

    pub fn shares_of(&self, party: usize) -> Vec<usize> {
        (0..self.q).filter(|&i| self.holds(party, i)).collect()
    }

    /// Share indices held by at least one member of `coalition`.
    pub fn visible_shares(&self, coalition: &[usize]) -> BTreeSet<usize> {
        coalition.iter().flat_map(|&p| self.shares_of(p)).collect()
    }

    /// Coalitions whose joint view must stay independent of the secret:
    /// every set of at most `t` parties for collaborative models, single
    /// parties otherwise.
    pub fn coalitions(&self) -> Vec<Vec<usize>> {
        if self.model.is_collaborative() {
            (0..=self.t.min(self.n)).flat_map(|k| (0..self.n).combinations(k)).collect()
        } else {
            (0..self.n).map(|p| vec![p]).collect()
        }
    }

    /// Every relevant coalition misses at least one share.
    pub fn is_structurally_private(&self) -> bool {
        self.coalitions().iter().all(|c| self.visible_shares(c).len() < self.q)
    }
}
