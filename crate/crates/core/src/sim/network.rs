use std::collections::BTreeMap;

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    AdversaryScript, Behavior, DeploymentConfig, Lab, LeakSinks, MessageClass, PartyId, SimError, Transcript,
    TranscriptEntry,
};
use crate::bits::{auth_tag, auth_verify, AuthError, BitString, KeyPool};
use crate::vss::{Endpoint, VssConfig, VssMessage, VssNet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    /// Private and authenticated, inside one lab.
    SecureInLab,
    /// Public but authenticated with pre-shared key pools.
    AuthenticatedLabToLab,
    /// Stands in for the optical link; its output comes from the channel models.
    QuantumPlaceholder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Channel {
    pub kind: ChannelKind,
    pub endpoints: (PartyId, PartyId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkOptions {
    /// Initial size of every lab-to-lab key pool.
    pub pool_bits: usize,
    /// Forgery bound each authentication tag is sized for.
    pub auth_gamma: f64,
    /// Whether QKD pairs meet at an untrusted relay (MDI) instead of
    /// linking directly.
    pub relay: bool,
    /// Seeds the key pools and the adversary's randomness.
    pub seed: u64,
    /// Keep a full message log.
    pub record_transcript: bool,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        Self { pool_bits: 1 << 14, auth_gamma: 1e-6, relay: false, seed: 0, record_transcript: true }
    }
}

/// Outcome of an authenticated lab-to-lab message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Delivery {
    Received(BitString),
    /// The sender stayed silent.
    Missing,
    /// The tag did not verify.
    Rejected,
}

/// Devices, channels, key pools and adversary of one simulated run.
/// Message order is fixed by the caller, so a session is deterministic
/// given its seed.
#[derive(Clone, Debug)]
pub struct Session {
    cfg: DeploymentConfig,
    vss: VssConfig,
    channels: Vec<Channel>,
    /// Pools per (Alice unit, Bob unit): Alice's copy, then Bob's.
    pools: BTreeMap<(usize, usize), [KeyPool; 2]>,
    auth_gamma: f64,
    script: AdversaryScript,
    sinks: LeakSinks,
    transcript: Transcript,
    record: bool,
    rng: ChaCha8Rng,
    /// Phase in which an outside forger alters every lab-to-lab message
    /// after it was tagged.
    pub forge_phase: Option<String>,
}

/// Wires the devices of both labs: every module to every local unit, the
/// units of a lab pairwise, and every Alice unit to every Bob unit over an
/// authenticated channel backed by its own key pool.
pub fn build_network(cfg: &DeploymentConfig, options: &NetworkOptions) -> Result<Session, SimError> {
    cfg.validate()?;
    let mut channels = Vec::new();
    for lab in [Lab::Alice, Lab::Bob] {
        for m in cfg.modules(lab) {
            for u in cfg.units(lab) {
                channels.push(Channel { kind: ChannelKind::SecureInLab, endpoints: (m, u) });
            }
        }
        for (a, b) in cfg.units(lab).tuple_combinations() {
            channels.push(Channel { kind: ChannelKind::SecureInLab, endpoints: (a, b) });
        }
    }
    let mut pool_rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut pools = BTreeMap::new();
    for (a, b) in cfg.units(Lab::Alice).cartesian_product(cfg.units(Lab::Bob)) {
        channels.push(Channel { kind: ChannelKind::AuthenticatedLabToLab, endpoints: (a, b) });
        let bits = BitString::random(options.pool_bits, &mut pool_rng);
        pools.insert((a.index, b.index), [KeyPool::new(bits.clone()), KeyPool::new(bits)]);
    }
    for j in 0..cfg.n_q {
        let (a, b) = (PartyId::module(Lab::Alice, j), PartyId::module(Lab::Bob, j));
        if options.relay {
            channels.push(Channel { kind: ChannelKind::QuantumPlaceholder, endpoints: (a, PartyId::relay()) });
            channels.push(Channel { kind: ChannelKind::QuantumPlaceholder, endpoints: (b, PartyId::relay()) });
        } else {
            channels.push(Channel { kind: ChannelKind::QuantumPlaceholder, endpoints: (a, b) });
        }
    }
    Ok(Session {
        cfg: *cfg,
        vss: cfg.unit_vss(),
        channels,
        pools,
        auth_gamma: options.auth_gamma,
        script: AdversaryScript::honest(),
        sinks: LeakSinks::default(),
        transcript: Transcript::default(),
        record: options.record_transcript,
        rng: ChaCha8Rng::seed_from_u64(options.seed ^ 0x5eed_ad7e_75a1_0001),
        forge_phase: None,
    })
}

/// Attaches `script` to the session and opens its leak sinks.
pub fn inject(mut session: Session, script: AdversaryScript) -> Result<Session, SimError> {
    session.inject(script)?;
    Ok(session)
}

impl Session {
    pub fn inject(&mut self, script: AdversaryScript) -> Result<(), SimError> {
        script.validate(&self.cfg)?;
        self.sinks = LeakSinks::for_script(&script);
        self.script = script;
        Ok(())
    }

    pub fn cfg(&self) -> &DeploymentConfig {
        &self.cfg
    }

    /// Share allocation among the units of either lab.
    pub fn vss(&self) -> &VssConfig {
        &self.vss
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channels_of(&self, kind: ChannelKind) -> impl Iterator<Item = &Channel> {
        self.channels.iter().filter(move |c| c.kind == kind)
    }

    pub fn script(&self) -> &AdversaryScript {
        &self.script
    }

    pub fn sinks(&self) -> &LeakSinks {
        &self.sinks
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    /// Unused bits of the pool Alice's `a`-th unit shares with Bob's `b`-th.
    pub fn pool_remaining(&self, a: usize, b: usize) -> Option<usize> {
        self.pools.get(&(a, b)).map(|p| p[0].remaining())
    }

    /// Units that hold the first share and talk to the other lab.
    pub fn first_committee(&self, lab: Lab) -> Vec<PartyId> {
        self.vss.sigma[0].iter().map(|&l| PartyId::unit(lab, l)).collect()
    }

    /// Corrupted under an active model, hence without output guarantees.
    pub fn is_active(&self, party: PartyId) -> bool {
        self.script.is_corrupted(party) && self.cfg.model_of(party).is_active()
    }

    pub fn is_corrupted(&self, party: PartyId) -> bool {
        self.script.is_corrupted(party)
    }

    pub fn behavior(&self, party: PartyId) -> Option<Behavior> {
        self.script.behavior(party)
    }

    /// Hands `payload` to the sink of `party` if it is corrupted.
    pub fn leak(&mut self, party: PartyId, phase: &str, label: &str, payload: &BitString) {
        if self.script.is_corrupted(party) {
            self.sinks.record(party, phase, label, payload);
        }
    }

    /// What `from` actually emits when the protocol asks it to send `payload`.
    fn outgoing(&mut self, from: PartyId, class: MessageClass, payload: &BitString) -> Option<BitString> {
        match self.script.behavior(from) {
            Some(Behavior::Silent) => None,
            Some(Behavior::Tamper { class: target, mutation }) if target.matches(class) => {
                Some(mutation.apply(payload, &mut self.rng))
            }
            _ => Some(payload.clone()),
        }
    }

    fn log(&mut self, phase: &str, kind: &'static str, from: String, to: PartyId, share: Option<usize>, payload: Option<&BitString>) {
        if self.record {
            self.transcript.push(TranscriptEntry {
                phase: phase.to_string(),
                kind,
                from,
                to: to.to_string(),
                share,
                payload: payload.cloned(),
            });
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn deliver(
        &mut self,
        phase: &str,
        class: MessageClass,
        kind: &'static str,
        from: PartyId,
        to: PartyId,
        share: Option<usize>,
        payload: &BitString,
    ) -> Option<BitString> {
        let got = self.outgoing(from, class, payload);
        self.log(phase, kind, from.to_string(), to, share, got.as_ref());
        if let Some(g) = &got {
            self.leak(to, phase, kind, g);
        }
        got
    }

    /// Secure in-lab message.
    pub fn send_in_lab(&mut self, phase: &str, class: MessageClass, from: PartyId, to: PartyId, payload: &BitString) -> Option<BitString> {
        debug_assert_eq!(from.lab, to.lab);
        self.deliver(phase, class, class.label(), from, to, None, payload)
    }

    /// Authenticated message between units of different labs. The sender
    /// tags with its pool copy and the receiver verifies with its own, so
    /// both copies advance in step.
    pub fn send_lab_to_lab(&mut self, phase: &str, from: PartyId, to: PartyId, payload: &BitString) -> Result<Delivery, SimError> {
        assert!(from.is_unit() && to.is_unit() && from.lab != to.lab && from.lab != Lab::Charles);
        let Some(sent) = self.outgoing(from, MessageClass::LabToLab, payload) else {
            self.log(phase, "l2l", from.to_string(), to, None, None);
            return Ok(Delivery::Missing);
        };
        let (a, b, side) = if from.lab == Lab::Alice { (from.index, to.index, 0) } else { (to.index, from.index, 1) };
        let gamma = self.auth_gamma;
        let pools = self.pools.get_mut(&(a, b)).expect("every unit pair has a pool");
        let (tag, _) = auth_tag(&mut pools[side], &sent, gamma).map_err(|e| match e {
            AuthError::PoolExhausted { needed, available } => SimError::PoolExhausted { from, to, needed, available },
            other => SimError::Auth(other),
        })?;
        let mut wire = sent;
        if self.forge_phase.as_deref() == Some(phase) {
            if wire.is_empty() {
                wire.push(true);
            } else {
                wire.flip(0);
            }
        }
        let ok = auth_verify(&mut pools[1 - side], &wire, &tag);
        self.log(phase, "l2l", from.to_string(), to, None, Some(&wire));
        self.leak(to, phase, "l2l", &wire);
        Ok(if ok { Delivery::Received(wire) } else { Delivery::Rejected })
    }

    /// Sharing network among the units of `lab`, with `dealer` standing
    /// behind [`Endpoint::Dealer`].
    pub fn lab_net<'a>(&'a mut self, lab: Lab, phase: &'a str, dealer: Option<PartyId>) -> LabNet<'a> {
        LabNet { session: self, lab, phase, dealer }
    }
}

/// [`VssNet`] view of one lab's units over a [`Session`].
pub struct LabNet<'a> {
    session: &'a mut Session,
    lab: Lab,
    phase: &'a str,
    dealer: Option<PartyId>,
}

impl LabNet<'_> {
    fn party(&self, from: Endpoint) -> PartyId {
        match from {
            Endpoint::Party(p) => PartyId::unit(self.lab, p),
            Endpoint::Dealer => self.dealer.expect("dealer traffic needs a dealer"),
        }
    }
}

impl VssNet for LabNet<'_> {
    fn is_active(&self, party: usize) -> bool {
        self.session.is_active(PartyId::unit(self.lab, party))
    }

    fn send(&mut self, kind: VssMessage, from: Endpoint, to: usize, share: usize, payload: &BitString) -> Option<BitString> {
        let (from, to) = (self.party(from), PartyId::unit(self.lab, to));
        let share = matches!(kind, VssMessage::Deal | VssMessage::Echo | VssMessage::Reveal).then_some(share);
        self.session.deliver(self.phase, MessageClass::of_vss(kind), kind.label(), from, to, share, payload)
    }

    fn false_abort(&mut self, party: usize) -> bool {
        self.session.behavior(PartyId::unit(self.lab, party)) == Some(Behavior::FalseAbort)
    }
}
