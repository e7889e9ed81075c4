use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::codec::{fit, Reader, Writer};
use super::{EcPlugin, KeyLength, KeyLengthPolicy, LengthContext, PairRecords, ProtocolError, ProtocolScheme, Sifting};
use crate::bits::{BitString, LfsrToeplitz, ToeplitzHash, MAX_TAG_LEN};
use crate::channel::ChannelParams;
use crate::inputs::ProtocolInputs;
use crate::keyrate::{ev_tag_bits, SecurityBudget};
use crate::sim::{
    build_network, rbs_generate, AdversaryScript, Behavior, Delivery, DeploymentConfig, Lab, LeakSinks, MessageClass,
    NetworkOptions, PartyId, Session, SimError, Transcript,
};
use crate::vss::{majority, reconstruct, share, Endpoint, Reconstruction, ShareTable, VssConfig};

/// Seed length of the random subset choice of `Z'_j`.
const SUBSET_SEED_BITS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Distribution,
    Sifting,
    Estimation,
    Reconciliation,
    Verification,
    Amplification,
    Output,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Distribution,
        Phase::Sifting,
        Phase::Estimation,
        Phase::Reconciliation,
        Phase::Verification,
        Phase::Amplification,
        Phase::Output,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Phase::Distribution => "distribution",
            Phase::Sifting => "sifting",
            Phase::Estimation => "estimation",
            Phase::Reconciliation => "reconciliation",
            Phase::Verification => "verification",
            Phase::Amplification => "amplification",
            Phase::Output => "output",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Phase {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.label() == s.trim())
            .ok_or_else(|| ProtocolError::Unknown { kind: "phase", name: s.to_string() })
    }
}

/// Phase label of the lab-to-lab abort notices, kept apart so that a
/// forger targeting a phase does not also block its abort.
const ABORT_PHASE: &str = "abort";

/// Faults injected from outside the adversary script.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FaultInjection {
    /// Flips this bit (modulo the key length) of Alice's first share after
    /// error correction.
    pub flip_corrected_bit: Option<usize>,
    /// Every lab-to-lab message of this phase is altered after tagging.
    pub forge_phase: Option<Phase>,
}

/// Plugins, budgets and network options of a run.
pub struct ProtocolSetup {
    pub scheme: Box<dyn ProtocolScheme>,
    pub ec: Box<dyn EcPlugin>,
    pub policy: Box<dyn KeyLengthPolicy>,
    pub budget: SecurityBudget,
    /// Size of every lab-to-lab key pool.
    pub pool_bits: usize,
    /// Forgery bound of each lab-to-lab tag.
    pub auth_gamma: f64,
    pub record_transcript: bool,
    pub faults: FaultInjection,
}

impl ProtocolSetup {
    pub fn new(scheme: Box<dyn ProtocolScheme>, ec: Box<dyn EcPlugin>, policy: Box<dyn KeyLengthPolicy>, budget: SecurityBudget) -> Self {
        let defaults = NetworkOptions::default();
        Self {
            scheme,
            ec,
            policy,
            budget,
            pool_bits: defaults.pool_bits,
            auth_gamma: defaults.auth_gamma,
            record_transcript: true,
            faults: FaultInjection::default(),
        }
    }
}

/// Why and where a run stopped, and which units learned of it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbortState {
    pub phase: Phase,
    pub origin: PartyId,
    pub reason: String,
    pub notified: BTreeSet<PartyId>,
}

/// Every intermediate share table of a completed run. Positions and seeds
/// are those seen by the first unit with output guarantees.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionKeys {
    pub records: Vec<PairRecords>,
    /// Shared raw key-basis strings `r_A^j`, `r_B^j`.
    pub raw_a: Vec<ShareTable>,
    pub raw_b: Vec<ShareTable>,
    /// Positions of `Z'_j` in `r_A^j` and `r_B^j`.
    pub positions_a: Vec<Vec<usize>>,
    pub positions_b: Vec<Vec<usize>>,
    /// Sifted keys, Bob's with the scheme's bit flips applied.
    pub s_a: ShareTable,
    pub s_b: ShareTable,
    pub sy_a: ShareTable,
    pub sy_b: ShareTable,
    /// Alice's key after error correction.
    pub s_hat_a: ShareTable,
    pub ev_a: ShareTable,
    pub ev_b: ShareTable,
    pub ev_seed: BitString,
    pub pa_seed: BitString,
    pub k_a: ShareTable,
    pub k_b: ShareTable,
    pub key_length: KeyLength,
    /// Final keys as reconstructed by each lab's units.
    pub output_a: Reconstruction,
    pub output_b: Reconstruction,
}

impl SessionKeys {
    /// Whether every unit with guarantees in both labs ends with the same
    /// key of length `l`, without ties.
    pub fn keys_agree(&self) -> bool {
        let (Some(a), Some(b)) = (self.output_a.common_value(), self.output_b.common_value()) else {
            return false;
        };
        a == b && a.len() as u64 == self.key_length.l && self.output_a.ties.is_empty() && self.output_b.ties.is_empty()
    }

    pub fn final_key(&self) -> Option<&BitString> {
        self.output_a.common_value()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Completed(Box<SessionKeys>),
    Aborted(AbortState),
}

impl Outcome {
    pub fn keys(&self) -> Option<&SessionKeys> {
        match self {
            Outcome::Completed(k) => Some(k),
            Outcome::Aborted(_) => None,
        }
    }

    pub fn abort(&self) -> Option<&AbortState> {
        match self {
            Outcome::Completed(_) => None,
            Outcome::Aborted(a) => Some(a),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub outcome: Outcome,
    pub transcript: Transcript,
    pub sinks: LeakSinks,
}

/// Keys as an end user reassembles them from a lab's units: majority vote
/// over the copies of every share, then XOR.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalKeys {
    pub k_a: BitString,
    pub k_b: BitString,
    /// Shares decided by a tie, over both tables.
    pub ties: usize,
}

pub fn finalize_keys(k_a: &ShareTable, k_b: &ShareTable) -> FinalKeys {
    let mut ties = 0;
    let mut combine = |table: &ShareTable| {
        table.copies.iter().fold(BitString::new(), |acc, copies| {
            let votes: Vec<BitString> = copies.values().cloned().collect();
            let (value, tie) = majority(&votes);
            ties += tie as usize;
            acc.xor(&value)
        })
    };
    let (k_a, k_b) = (combine(k_a), combine(k_b));
    FinalKeys { k_a, k_b, ties }
}

/// A unit's decision to abort.
struct Halt {
    phase: Phase,
    origin: PartyId,
    reason: String,
}

type Step<T> = Result<Result<T, Halt>, ProtocolError>;

fn halt<T>(phase: Phase, origin: PartyId, reason: impl Into<String>) -> Step<T> {
    Ok(Err(Halt { phase, origin, reason: reason.into() }))
}

macro_rules! step {
    ($e:expr) => {
        match $e? {
            Ok(v) => v,
            Err(h) => return Ok(Err(h)),
        }
    };
}

/// Per-unit values of one lab, for the units that computed one.
type View<T> = BTreeMap<usize, T>;

/// `view[u]`, or the first available value for units whose own computation
/// is meaningless (actively corrupted ones).
fn pick<T: Clone>(view: &View<T>, u: usize) -> T {
    view.get(&u).or_else(|| view.values().next()).cloned().expect("some unit has a value")
}

fn per_holder<F: FnMut(usize, &BitString) -> Result<BitString, ProtocolError>>(table: &ShareTable, mut f: F) -> Result<ShareTable, ProtocolError> {
    let mut copies = Vec::with_capacity(table.q());
    for c in &table.copies {
        let mut m = BTreeMap::new();
        for (&p, s) in c {
            m.insert(p, f(p, s)?);
        }
        copies.push(m);
    }
    Ok(ShareTable { copies })
}

/// Sorted random `M`-subset of `0..n` drawn from a shared seed.
fn subset_from_seed(seed: &BitString, n: usize, m: usize) -> Vec<usize> {
    let mut bytes = [0u8; 32];
    for (i, b) in seed.to_bytes().into_iter().take(32).enumerate() {
        bytes[i] = b;
    }
    let mut rng = ChaCha8Rng::from_seed(bytes);
    let mut picked = index::sample(&mut rng, n, m).into_vec();
    picked.sort_unstable();
    picked
}

/// The seeds of both hashes, drawn together by Bob's units.
#[derive(Clone, Debug)]
struct Hashes {
    ev_seed: BitString,
    pa_seed: BitString,
    ev: LfsrToeplitz,
    pa: ToeplitzHash,
}

/// What Bob's first committee tells Alice's after estimation.
#[derive(Clone, Debug, PartialEq)]
struct BobMessage {
    positions: Vec<Vec<usize>>,
    syndrome: BitString,
    ev_seed: BitString,
    tag: BitString,
    pa_seed: BitString,
    l: u64,
}

impl BobMessage {
    fn encode(&self) -> BitString {
        let mut w = Writer::new();
        w.uint(self.positions.len() as u64, super::codec::COUNT_BITS);
        for p in &self.positions {
            w.positions(p);
        }
        w.field(&self.syndrome).field(&self.ev_seed).field(&self.tag).field(&self.pa_seed).uint(self.l, 64);
        w.finish()
    }

    fn decode(bits: &BitString) -> Option<Self> {
        let mut r = Reader::new(bits);
        let pairs = r.count()?;
        if pairs > bits.len() {
            return None;
        }
        let positions = (0..pairs).map(|_| r.positions()).collect::<Option<Vec<_>>>()?;
        let msg = BobMessage {
            positions,
            syndrome: r.field()?,
            ev_seed: r.field()?,
            tag: r.field()?,
            pa_seed: r.field()?,
            l: r.uint(64)?,
        };
        r.is_done().then_some(msg)
    }

    /// The part Alice's committee forwards to her other units.
    fn public_part(&self) -> BobMessage {
        BobMessage { syndrome: BitString::new(), tag: BitString::new(), ..self.clone() }
    }
}

struct Runner<'a> {
    setup: &'a ProtocolSetup,
    cfg: DeploymentConfig,
    vss: VssConfig,
    inputs: &'a ProtocolInputs,
    params: &'a ChannelParams,
    seed: u64,
    session: Session,
    rng: ChaCha8Rng,
    sigma1: Vec<usize>,
    m: usize,
}

impl<'a> Runner<'a> {
    fn unit(lab: Lab, u: usize) -> PartyId {
        PartyId::unit(lab, u)
    }

    fn guaranteed(&self, lab: Lab, u: usize) -> bool {
        !self.session.is_active(Self::unit(lab, u))
    }

    fn units(&self) -> std::ops::Range<usize> {
        0..self.cfg.n_c
    }

    fn first_guaranteed(&self, lab: Lab) -> usize {
        self.units().find(|&u| self.guaranteed(lab, u)).expect("some unit carries guarantees")
    }

    fn pool_halt<T>(&self, phase: Phase, e: SimError) -> Step<T> {
        match e {
            SimError::PoolExhausted { from, .. } => halt(phase, from, e.to_string()),
            other => Err(other.into()),
        }
    }

    /// Lab-to-lab transfer from each first-committee unit of `from` to each
    /// of `to`'s. Returns the majority value seen by every receiving unit.
    fn cross(&mut self, phase: Phase, from: Lab, payloads: &View<BitString>) -> Step<View<BitString>> {
        let to = from.peer();
        let mut received: View<Vec<BitString>> = BTreeMap::new();
        for &b in &self.sigma1 {
            received.insert(b, Vec::new());
        }
        for &a in &self.sigma1 {
            let payload = pick(payloads, a);
            for &b in &self.sigma1 {
                let delivery = match self.session.send_lab_to_lab(phase.label(), Self::unit(from, a), Self::unit(to, b), &payload) {
                    Ok(d) => d,
                    Err(e) => return self.pool_halt(phase, e),
                };
                match delivery {
                    Delivery::Received(m) => received.get_mut(&b).expect("committee member").push(m),
                    Delivery::Missing => {}
                    Delivery::Rejected if self.guaranteed(to, b) => {
                        return halt(phase, Self::unit(to, b), "lab-to-lab authentication failed");
                    }
                    Delivery::Rejected => {}
                }
            }
        }
        Ok(Ok(received.into_iter().map(|(b, votes)| (b, majority(&votes).0)).collect()))
    }

    /// The first committee hands a value to the other units of its lab,
    /// which take the majority. Committee members keep their own value.
    fn forward(&mut self, phase: Phase, lab: Lab, values: &View<BitString>) -> View<BitString> {
        let mut out: View<BitString> = BTreeMap::new();
        for u in self.units() {
            if self.sigma1.contains(&u) {
                out.insert(u, pick(values, u));
                continue;
            }
            let mut votes = Vec::new();
            for &s in &self.sigma1.clone() {
                let payload = pick(values, s);
                if let Some(got) = self.session.send_in_lab(phase.label(), MessageClass::Forward, Self::unit(lab, s), Self::unit(lab, u), &payload) {
                    votes.push(got);
                }
            }
            out.insert(u, majority(&votes).0);
        }
        out
    }

    fn rbs(&mut self, phase: Phase, lab: Lab, len: usize) -> Step<View<BitString>> {
        let mut net = self.session.lab_net(lab, phase.label(), None);
        match rbs_generate(len, &self.vss, &mut net, &mut self.rng) {
            Ok(out) => Ok(Ok(out.outputs)),
            Err(a) => halt(phase, Self::unit(lab, a.origin), a.reason),
        }
    }

    fn reconstruct(&mut self, phase: Phase, lab: Lab, table: &ShareTable) -> View<BitString> {
        let mut net = self.session.lab_net(lab, phase.label(), None);
        reconstruct(&self.vss, table, &mut net).outputs.into_iter().map(|(u, o)| (u, o.value)).collect()
    }

    fn reconstruction(&mut self, phase: Phase, lab: Lab, table: &ShareTable) -> Reconstruction {
        let mut net = self.session.lab_net(lab, phase.label(), None);
        reconstruct(&self.vss, table, &mut net)
    }

    /// A module shares its raw string and hands its announcement to the
    /// first committee, which cross-checks the copies and the share lengths.
    /// Returns the table fitted to the announced length and each committee
    /// member's copy of the announcement.
    fn distribute(&mut self, lab: Lab, j: usize, raw: &BitString, info: &BitString) -> Step<(ShareTable, View<BitString>)> {
        let phase = Phase::Distribution;
        let module = PartyId::module(lab, j);
        self.session.leak(module, phase.label(), "raw", raw);
        self.session.leak(module, phase.label(), "info", info);
        let table = {
            let mut net = self.session.lab_net(lab, phase.label(), Some(module));
            match share(&self.vss, Endpoint::Dealer, raw, &mut net, &mut self.rng) {
                Ok(t) => t,
                Err(a) => return halt(phase, Self::unit(lab, a.origin), a.reason),
            }
        };
        let sigma1 = self.sigma1.clone();
        let mut copies: View<BitString> = BTreeMap::new();
        for &u in &sigma1 {
            let got = self.session.send_in_lab(phase.label(), MessageClass::Info, module, Self::unit(lab, u), info);
            copies.insert(u, got.unwrap_or_default());
        }
        for &u in &sigma1 {
            if self.session.behavior(Self::unit(lab, u)) == Some(Behavior::FalseAbort) {
                return halt(phase, Self::unit(lab, u), "unwarranted abort order");
            }
            for &v in sigma1.iter().filter(|&&v| v != u) {
                let echo = self.session.send_in_lab(phase.label(), MessageClass::Echo, Self::unit(lab, u), Self::unit(lab, v), &copies[&u]);
                if self.guaranteed(lab, v) && echo.as_ref() != Some(&copies[&v]) {
                    return halt(phase, Self::unit(lab, v), "announcement copies differ");
                }
            }
        }

        let declared = |info: &BitString| match lab {
            Lab::Alice => self.setup.scheme.raw_len_a(info),
            _ => self.setup.scheme.raw_len_b(info),
        };
        let mut lengths: View<usize> = BTreeMap::new();
        for &u in &sigma1 {
            if !self.guaranteed(lab, u) {
                continue;
            }
            let Some(len) = declared(&copies[&u]) else {
                return halt(phase, Self::unit(lab, u), "malformed announcement");
            };
            lengths.insert(u, len);
        }
        for u in self.units() {
            if !self.guaranteed(lab, u) {
                continue;
            }
            let held: BTreeSet<usize> = table.copies.iter().filter_map(|c| c.get(&u).map(BitString::len)).collect();
            let expected = lengths.get(&u);
            if held.len() > 1 || expected.is_some_and(|e| held.iter().any(|h| h != e)) {
                return halt(phase, Self::unit(lab, u), "share length differs from the announced length");
            }
        }
        let Some(&len) = lengths.values().next() else {
            return halt(phase, Self::unit(lab, sigma1[0]), "no announcement reached the committee");
        };
        let table = table.map_linear(|s| fit(s, len));
        Ok(Ok((table, copies)))
    }

    fn run(&mut self) -> Step<SessionKeys> {
        let (n_q, m) = (self.cfg.n_q, self.m);
        let sigma1 = self.sigma1.clone();

        // Quantum phase and distribution.
        let (setup, inputs, params) = (self.setup, self.inputs, self.params);
        let mut qrng = ChaCha8Rng::seed_from_u64(self.seed);
        let records: Vec<PairRecords> = (0..n_q).map(|_| setup.scheme.generate(params, inputs, &mut qrng)).collect();
        let (mut raw_a, mut raw_b, mut info_a, mut info_b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (j, rec) in records.iter().enumerate() {
            let (t, c) = step!(self.distribute(Lab::Alice, j, &rec.raw_a, &rec.info_a));
            raw_a.push(t);
            info_a.push(c);
            let (t, c) = step!(self.distribute(Lab::Bob, j, &rec.raw_b, &rec.info_b));
            raw_b.push(t);
            info_b.push(c);
        }

        // Sifting: Alice's announcements cross over, Bob's committee sifts,
        // everybody in Bob's lab learns Z_j and draws Z'_j.
        let phase = Phase::Sifting;
        let mut siftings: Vec<View<Sifting>> = Vec::new();
        let mut selections: Vec<View<Vec<usize>>> = Vec::new();
        let mut s_b_parts = Vec::new();
        for j in 0..n_q {
            let at_bob = step!(self.cross(phase, Lab::Alice, &info_a[j]));
            let mut sift_view: View<Sifting> = BTreeMap::new();
            for &b in &sigma1 {
                if !self.guaranteed(Lab::Bob, b) {
                    continue;
                }
                let Some(s) = self.setup.scheme.sift(&at_bob[&b], &info_b[j][&b]) else {
                    return halt(phase, Self::unit(Lab::Bob, b), "malformed announcement");
                };
                if s.z_a.len() < m {
                    return halt(phase, Self::unit(Lab::Bob, b), format!("{} key-basis detections, {m} needed", s.z_a.len()));
                }
                sift_view.insert(b, s);
            }
            let z_view: View<BitString> = sift_view.iter().map(|(&b, s)| (b, Writer::new().positions(&s.z_b).finish())).collect();
            let z_view = self.forward(phase, Lab::Bob, &z_view);
            let seeds = step!(self.rbs(phase, Lab::Bob, SUBSET_SEED_BITS));
            let mut positions: View<Vec<usize>> = BTreeMap::new();
            let mut selection: View<Vec<usize>> = BTreeMap::new();
            for u in self.units() {
                if !self.guaranteed(Lab::Bob, u) {
                    continue;
                }
                let Some(z_b) = Reader::new(&z_view[&u]).positions().filter(|z| z.len() >= m) else {
                    return halt(phase, Self::unit(Lab::Bob, u), "malformed key-basis positions");
                };
                let sel = subset_from_seed(&seeds[&u], z_b.len(), m);
                positions.insert(u, sel.iter().map(|&i| z_b[i]).collect());
                selection.insert(u, sel);
            }
            let len = raw_b[j].copies[0].values().next().map_or(0, BitString::len);
            if let Some((&u, _)) = positions.iter().find(|(_, p)| p.iter().any(|&i| i >= len)) {
                return halt(phase, Self::unit(Lab::Bob, u), "key-basis position out of range");
            }
            s_b_parts.push(per_holder(&raw_b[j], |u, s| Ok(s.select(&pick(&positions, u))))?);
            siftings.push(sift_view);
            selections.push(selection);
        }

        // Parameter estimation on Bob's committee, then bit flips.
        let phase = Phase::Estimation;
        let mut lengths: View<KeyLength> = BTreeMap::new();
        for &b in &sigma1 {
            if !self.guaranteed(Lab::Bob, b) {
                continue;
            }
            let sifts: Vec<Sifting> = siftings.iter().map(|v| v[&b].clone()).collect();
            let sels: Vec<Vec<usize>> = selections.iter().map(|v| v[&b].clone()).collect();
            let ctx = LengthContext {
                scheme: self.setup.scheme.as_ref(),
                deployment: &self.cfg,
                inputs: self.inputs,
                budget: &self.setup.budget,
                siftings: &sifts,
                selections: &sels,
            };
            let kl = self.setup.policy.key_length(&ctx)?;
            if kl.l == 0 {
                return halt(phase, Self::unit(Lab::Bob, b), format!("no extractable key (l = {:.1})", kl.l_raw));
            }
            lengths.insert(b, kl);
        }
        let l_view: View<BitString> = lengths.iter().map(|(&b, kl)| (b, BitString::from_u64(kl.l, 64))).collect();
        let l_view = self.forward(phase, Lab::Bob, &l_view);
        let l_of = |u: usize| pick(&l_view, u).to_u64();
        let mut s_b = ShareTable::concat(&s_b_parts);
        if self.setup.scheme.flips_key() {
            s_b.add_to_first_share(&BitString::ones(m * n_q));
        }
        let key_len = m * n_q;
        let tag_bits = ev_tag_bits(self.setup.budget.hat_eps_cor());
        if !(tag_bits >= 1.0 && tag_bits <= MAX_TAG_LEN as f64) {
            return Err(ProtocolError::Inputs(format!("verification tag of {tag_bits} bits is out of range")));
        }
        let tag_bits = tag_bits as usize;
        let ref_bob = self.first_guaranteed(Lab::Bob);
        let l = l_of(ref_bob) as usize;
        let ev_len = LfsrToeplitz::seed_len(tag_bits);
        let seeds = step!(self.rbs(phase, Lab::Bob, ev_len + ToeplitzHash::seed_len(key_len, l)));
        let make_hashes = |seed: &BitString, l: usize| -> Result<Hashes, ProtocolError> {
            let ev_seed = seed.slice(0, ev_len);
            let pa_seed = fit(&seed.slice(ev_len, seed.len() - ev_len), ToeplitzHash::seed_len(key_len, l));
            Ok(Hashes {
                ev: LfsrToeplitz::from_seed(&ev_seed, tag_bits),
                pa: ToeplitzHash::new(pa_seed.clone(), key_len, l)?,
                ev_seed,
                pa_seed,
            })
        };
        let mut bob_hashes: View<Hashes> = BTreeMap::new();
        for (&u, seed) in &seeds {
            bob_hashes.insert(u, make_hashes(seed, l_of(u) as usize)?);
        }

        // Reconciliation: Bob's syndrome and tag go to Alice with the seeds.
        let phase = Phase::Reconciliation;
        let ec = setup.ec.as_ref();
        let syndromes = |s: &BitString| -> BitString { BitString::concat(&(0..n_q).map(|j| ec.syndrome(&s.slice(j * m, m))).collect::<Vec<_>>()) };
        let sy_b = s_b.map_linear(|s| syndromes(&fit(s, key_len)));
        let ev_b = per_holder(&s_b, |u, s| Ok(pick(&bob_hashes, u).ev.hash(s)))?;
        let sy_b_out = self.reconstruct(phase, Lab::Bob, &sy_b);
        let ev_b_out = self.reconstruct(phase, Lab::Bob, &ev_b);
        let mut to_alice: View<BitString> = BTreeMap::new();
        for &b in &sigma1 {
            let sift_b = siftings.iter().map(|v| pick(v, b)).collect::<Vec<_>>();
            let sel_b = selections.iter().map(|v| pick(v, b)).collect::<Vec<_>>();
            let h = pick(&bob_hashes, b);
            let msg = BobMessage {
                positions: sift_b.iter().zip(&sel_b).map(|(s, sel)| sel.iter().map(|&i| s.z_a[i]).collect()).collect(),
                syndrome: pick(&sy_b_out, b),
                ev_seed: h.ev_seed.clone(),
                tag: pick(&ev_b_out, b),
                pa_seed: h.pa_seed.clone(),
                l: l_of(b),
            };
            to_alice.insert(b, msg.encode());
        }
        let at_alice = step!(self.cross(phase, Lab::Bob, &to_alice));
        let mut alice_msgs: View<BobMessage> = BTreeMap::new();
        for &a in &sigma1 {
            if !self.guaranteed(Lab::Alice, a) {
                continue;
            }
            match BobMessage::decode(&at_alice[&a]).filter(|msg| msg.positions.len() == n_q) {
                Some(msg) => alice_msgs.insert(a, msg),
                None => return halt(phase, Self::unit(Lab::Alice, a), "malformed reconciliation message"),
            };
        }
        let public: View<BitString> = alice_msgs.iter().map(|(&a, msg)| (a, msg.public_part().encode())).collect();
        let public = self.forward(phase, Lab::Alice, &public);
        let mut alice_view: View<BobMessage> = BTreeMap::new();
        let mut alice_hashes: View<Hashes> = BTreeMap::new();
        for u in self.units() {
            if !self.guaranteed(Lab::Alice, u) {
                continue;
            }
            let msg = match alice_msgs.get(&u) {
                Some(msg) => Some(msg.clone()),
                None => BobMessage::decode(&public[&u]),
            };
            let Some(msg) = msg.filter(|msg| msg.positions.len() == n_q && msg.positions.iter().all(|p| p.len() == m)) else {
                return halt(phase, Self::unit(Lab::Alice, u), "malformed reconciliation message");
            };
            let mut seed = msg.ev_seed.clone();
            seed.append(&msg.pa_seed);
            if msg.ev_seed.len() != ev_len || msg.pa_seed.len() != ToeplitzHash::seed_len(key_len, msg.l as usize) {
                return halt(phase, Self::unit(Lab::Alice, u), "hash descriptions have the wrong length");
            }
            for (j, p) in msg.positions.iter().enumerate() {
                let len = raw_a[j].copies[0].values().next().map_or(0, BitString::len);
                if p.iter().any(|&i| i >= len) {
                    return halt(phase, Self::unit(Lab::Alice, u), "key-basis position out of range");
                }
            }
            alice_hashes.insert(u, make_hashes(&seed, msg.l as usize)?);
            alice_view.insert(u, msg);
        }
        let s_a_parts = (0..n_q)
            .map(|j| per_holder(&raw_a[j], |u, s| Ok(s.select(&pick(&alice_view, u).positions[j]))))
            .collect::<Result<Vec<_>, _>>()?;
        let s_a = ShareTable::concat(&s_a_parts);
        let sy_a = s_a.map_linear(|s| syndromes(s));
        let sy_a_out = self.reconstruct(phase, Lab::Alice, &sy_a);
        let mut s_hat_a = s_a.clone();
        for (&a, copy) in s_hat_a.copies[0].iter_mut() {
            let mine = pick(&alice_view, a);
            if let Some(e) = ec.correction(&pick(&sy_a_out, a), &mine.syndrome) {
                copy.xor_assign(&fit(&e, key_len));
            }
        }
        if let Some(bit) = self.setup.faults.flip_corrected_bit {
            for copy in s_hat_a.copies[0].values_mut() {
                copy.flip(bit % key_len);
            }
        }

        // Verification: Alice's committee compares tags.
        let phase = Phase::Verification;
        let ev_a = per_holder(&s_hat_a, |u, s| Ok(pick(&alice_hashes, u).ev.hash(s)))?;
        let ev_a_out = self.reconstruct(phase, Lab::Alice, &ev_a);
        for &a in &sigma1 {
            if self.guaranteed(Lab::Alice, a) && ev_a_out.get(&a) != Some(&alice_view[&a].tag) {
                return halt(phase, Self::unit(Lab::Alice, a), "verification tags differ");
            }
        }

        // Privacy amplification, share by share.
        let k_a = per_holder(&s_hat_a, |u, s| Ok(pick(&alice_hashes, u).pa.apply(s)?))?;
        let k_b = per_holder(&s_b, |u, s| Ok(pick(&bob_hashes, u).pa.apply(&fit(s, key_len))?))?;

        let output_a = self.reconstruction(Phase::Output, Lab::Alice, &k_a);
        let output_b = self.reconstruction(Phase::Output, Lab::Bob, &k_b);

        let ref_alice = self.first_guaranteed(Lab::Alice);
        let hashes = pick(&bob_hashes, ref_bob);
        Ok(Ok(SessionKeys {
            records,
            raw_a,
            raw_b,
            positions_a: pick(&alice_view, ref_alice).positions,
            positions_b: (0..n_q)
                .map(|j| {
                    let s = pick(&siftings[j], ref_bob);
                    pick(&selections[j], ref_bob).iter().map(|&i| s.z_b[i]).collect()
                })
                .collect(),
            s_a,
            s_b,
            sy_a,
            sy_b,
            s_hat_a,
            ev_a,
            ev_b,
            ev_seed: hashes.ev_seed,
            pa_seed: hashes.pa_seed,
            k_a,
            k_b,
            key_length: pick(&lengths, ref_bob),
            output_a,
            output_b,
        }))
    }

    /// In-lab abort notice from `starters`, relayed once by every unit that
    /// received it.
    fn flood(&mut self, lab: Lab, starters: &[usize], notified: &mut BTreeSet<PartyId>) {
        let order = BitString::ones(1);
        let mut fresh = Vec::new();
        for &s in starters {
            for u in self.units() {
                let to = Self::unit(lab, u);
                if u != s && !notified.contains(&to) {
                    let got = self.session.send_in_lab(ABORT_PHASE, MessageClass::Forward, Self::unit(lab, s), to, &order);
                    if got.is_some() {
                        notified.insert(to);
                        fresh.push(u);
                    }
                }
            }
        }
        for &r in &fresh {
            for u in self.units() {
                let to = Self::unit(lab, u);
                if u != r && !notified.contains(&to) && self.session.send_in_lab(ABORT_PHASE, MessageClass::Forward, Self::unit(lab, r), to, &order).is_some() {
                    notified.insert(to);
                }
            }
        }
    }

    /// Spreads an abort through the origin's lab and, over the
    /// authenticated links, through the other lab.
    fn propagate(&mut self, h: Halt) -> AbortState {
        let lab = h.origin.lab;
        let mut notified = BTreeSet::from([h.origin]);
        self.flood(lab, &[h.origin.index], &mut notified);
        let order = BitString::ones(1);
        let mut reached = Vec::new();
        for &a in &self.sigma1.clone() {
            if !notified.contains(&Self::unit(lab, a)) {
                continue;
            }
            for &b in &self.sigma1.clone() {
                let to = Self::unit(lab.peer(), b);
                if let Ok(Delivery::Received(_)) = self.session.send_lab_to_lab(ABORT_PHASE, Self::unit(lab, a), to, &order) {
                    if notified.insert(to) {
                        reached.push(b);
                    }
                }
            }
        }
        self.flood(lab.peer(), &reached, &mut notified);
        AbortState { phase: h.phase, origin: h.origin, reason: h.reason, notified }
    }
}

/// Runs one post-processing session end to end: quantum rounds, sharing,
/// sifting, estimation, reconciliation, verification and amplification.
/// An abort is a regular outcome; errors mean the setup itself is unusable.
pub fn run_protocol(
    setup: &ProtocolSetup,
    cfg: &DeploymentConfig,
    params: &ChannelParams,
    inputs: &ProtocolInputs,
    script: &AdversaryScript,
    seed: u64,
) -> Result<ProtocolRun, ProtocolError> {
    if inputs.n == 0 || inputs.m == 0 {
        return Err(ProtocolError::Inputs("N and M must be positive".into()));
    }
    if !inputs.is_well_formed() {
        return Err(ProtocolError::Inputs("probabilities or intensity order".into()));
    }
    setup.budget.validate()?;
    let options = NetworkOptions {
        pool_bits: setup.pool_bits,
        auth_gamma: setup.auth_gamma,
        relay: setup.scheme.uses_relay(),
        seed,
        record_transcript: setup.record_transcript,
    };
    let mut session = build_network(cfg, &options)?;
    session.inject(script.clone())?;
    session.forge_phase = setup.faults.forge_phase.map(|p| p.label().to_string());
    let vss = session.vss().clone();
    let sigma1 = vss.sigma[0].clone();
    let mut runner = Runner {
        setup,
        cfg: *cfg,
        vss,
        inputs,
        params,
        seed,
        session,
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x0c1a_551c_0a1d_0001),
        sigma1,
        m: inputs.m as usize,
    };
    let outcome = match runner.run()? {
        Ok(keys) => Outcome::Completed(Box::new(keys)),
        Err(h) => Outcome::Aborted(runner.propagate(h)),
    };
    let sinks = runner.session.sinks().clone();
    Ok(ProtocolRun { outcome, transcript: runner.session.into_transcript(), sinks })
}
