use std::collections::BTreeMap;

use rand::RngCore;

use crate::bits::BitString;
use crate::vss::{broadcast_abort, reconstruct, share, Abort, Endpoint, VssConfig, VssMessage, VssNet};

/// Common random string as obtained by each party with output guarantees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RbsOutput {
    pub outputs: BTreeMap<usize, BitString>,
    /// `(party, share)` pairs decided by a tie during Reconstruct.
    pub ties: Vec<(usize, usize)>,
}

impl RbsOutput {
    /// The value if every party with guarantees holds the same one.
    pub fn common(&self) -> Option<&BitString> {
        let mut values = self.outputs.values();
        let first = values.next()?;
        values.all(|v| v == first).then_some(first)
    }
}

/// Random bit string generation. Under active models parties `0..=t` each
/// share a fresh `len`-bit string, everybody reconstructs all of them and
/// XORs the results, so one honest dealer makes the output uniform. Under
/// passive models party 0 draws the string and hands it out directly.
///
/// A party that receives a share of the wrong length aborts.
pub fn rbs_generate<R: RngCore + ?Sized>(len: usize, cfg: &VssConfig, net: &mut dyn VssNet, rng: &mut R) -> Result<RbsOutput, Abort> {
    if !cfg.model.is_active() {
        let r = BitString::random(len, rng);
        let mut outputs = BTreeMap::from([(0, r.clone())]);
        for p in 1..cfg.n {
            let got = net.send(VssMessage::Deal, Endpoint::Party(0), p, 0, &r).unwrap_or_default();
            if got.len() != len {
                broadcast_abort(cfg, p, net);
                return Err(Abort { origin: p, reason: "random string has the wrong length".into() });
            }
            outputs.insert(p, got);
        }
        return Ok(RbsOutput { outputs, ties: Vec::new() });
    }

    let dealers = (cfg.t + 1).min(cfg.n);
    let mut tables = Vec::with_capacity(dealers);
    for k in 0..dealers {
        let r_k = BitString::random(len, rng);
        let table = share(cfg, Endpoint::Party(k), &r_k, net, rng)?;
        let short = table.copies.iter().flat_map(|c| c.iter()).find(|&(&p, s)| !net.is_active(p) && s.len() != len);
        if let Some((&p, _)) = short {
            broadcast_abort(cfg, p, net);
            return Err(Abort { origin: p, reason: "share length differs from the requested length".into() });
        }
        tables.push(table);
    }

    let mut outputs: BTreeMap<usize, BitString> = BTreeMap::new();
    let mut ties = Vec::new();
    for table in &tables {
        let rec = reconstruct(cfg, table, net);
        ties.extend(rec.ties);
        for (p, out) in rec.outputs {
            outputs.entry(p).and_modify(|acc| acc.xor_assign(&out.value)).or_insert(out.value);
        }
    }
    Ok(RbsOutput { outputs, ties })
}
