use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redqkd_core::bits::BitString;
use redqkd_core::sim::*;
use redqkd_core::vss::{reconstruct, share, CorruptionModel, Endpoint, HonestNet, VssConfig, VssMessage, VssNet};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use CorruptionModel::*;

fn count(session: &Session, kind: ChannelKind) -> usize {
    session.channels_of(kind).count()
}

#[test]
fn topology_examples() {
    let pn = build_network(&DeploymentConfig::pn(), &NetworkOptions::default()).unwrap();
    assert_eq!((pn.cfg().n_q, pn.cfg().n_c), (2, 2));
    assert_eq!(count(&pn, ChannelKind::AuthenticatedLabToLab), 4);
    // Per lab: 2 modules x 2 units plus one unit pair.
    assert_eq!(count(&pn, ChannelKind::SecureInLab), 2 * (4 + 1));
    assert_eq!(count(&pn, ChannelKind::QuantumPlaceholder), 2);

    let ac = build_network(&DeploymentConfig::ac(1), &NetworkOptions::default()).unwrap();
    assert_eq!((ac.cfg().n_q, ac.cfg().n_c), (2, 4));
    assert_eq!(count(&ac, ChannelKind::AuthenticatedLabToLab), 16);
    assert_eq!(count(&ac, ChannelKind::SecureInLab), 2 * (2 * 4 + 6));

    let honest = build_network(&DeploymentConfig::honest(), &NetworkOptions { relay: true, ..Default::default() }).unwrap();
    assert_eq!((honest.cfg().n_q, honest.cfg().n_c), (1, 1));
    assert_eq!(count(&honest, ChannelKind::AuthenticatedLabToLab), 1);
    assert_eq!(count(&honest, ChannelKind::SecureInLab), 2);
    // The relay replaces the direct link.
    assert!(honest.channels_of(ChannelKind::QuantumPlaceholder).all(|c| c.endpoints.1 == PartyId::relay()));
}

#[test]
fn every_module_reaches_every_local_unit() {
    let cfg = DeploymentConfig::ac(2);
    let s = build_network(&cfg, &NetworkOptions::default()).unwrap();
    for lab in [Lab::Alice, Lab::Bob] {
        for m in cfg.modules(lab) {
            for u in cfg.units(lab) {
                assert!(s.channels().iter().any(|c| c.kind == ChannelKind::SecureInLab && c.endpoints == (m, u)));
            }
        }
    }
    for a in cfg.units(Lab::Alice) {
        for b in cfg.units(Lab::Bob) {
            assert!(s.channels().iter().any(|c| c.kind == ChannelKind::AuthenticatedLabToLab && c.endpoints == (a, b)));
            assert_eq!(s.pool_remaining(a.index, b.index), Some(NetworkOptions::default().pool_bits));
        }
    }
}

#[test]
fn deployment_rules() {
    let c = DeploymentConfig::new(AC, 2, AC, 2).unwrap();
    assert_eq!((c.n_q, c.n_c), (3, 7));
    let c = DeploymentConfig::new(PN, 1, PC, 3).unwrap();
    assert_eq!((c.n_q, c.n_c), (2, 4));
    let c = DeploymentConfig::new(PN, 2, AN, 2).unwrap();
    assert_eq!((c.n_q, c.n_c), (2, 6));
    assert!(DeploymentConfig::new(AC, 1, AN, 1).is_err());

    let mut bad = DeploymentConfig::ac(1);
    bad.n_c = 3;
    assert!(matches!(bad.validate(), Err(SimError::InvalidDeployment(_))));
    let mut bad = DeploymentConfig::ac(1);
    bad.n_q = 1;
    assert!(bad.validate().is_err());
    let mut bad = DeploymentConfig::pn();
    bad.n_q = 3;
    assert!(bad.validate().is_err());
    assert!(build_network(&bad, &NetworkOptions::default()).is_err());

    let d = DeploymentConfig::ac(3).key_deployment();
    assert_eq!((d.n_q, d.t_q, d.t_c), (4, 3, 3));
}

#[test]
fn text_forms_round_trip() {
    for p in [PartyId::unit(Lab::Alice, 3), PartyId::module(Lab::Bob, 0), PartyId::relay()] {
        assert_eq!(p.to_string().parse::<PartyId>().unwrap(), p);
    }
    assert_eq!(PartyId::unit(Lab::Bob, 12).to_string(), "B.u12");
    assert!("X.u1".parse::<PartyId>().is_err());
    assert!("A.z1".parse::<PartyId>().is_err());
    let behaviors = [
        Behavior::Leak,
        Behavior::Silent,
        Behavior::FalseAbort,
        Behavior::Tamper { class: MessageClass::Reveal, mutation: Mutation::FlipRandom },
        Behavior::Tamper { class: MessageClass::Any, mutation: Mutation::Truncate },
    ];
    for b in behaviors {
        assert_eq!(b.to_string().parse::<Behavior>().unwrap(), b);
    }
    assert!("tamper:reveal".parse::<Behavior>().is_err());
    assert!("explode".parse::<Behavior>().is_err());
}

#[test]
fn mutations_change_payloads() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = BitString::from_binary("1011").unwrap();
    assert_eq!(Mutation::FlipFirst.apply(&m, &mut rng), BitString::from_binary("0011").unwrap());
    assert_eq!(Mutation::FlipRandom.apply(&m, &mut rng).xor(&m).count_ones(), 1);
    assert_eq!(Mutation::Truncate.apply(&m, &mut rng).len(), 3);
    assert_eq!(Mutation::Extend.apply(&m, &mut rng).len(), 5);
    assert_eq!(Mutation::Randomize.apply(&m, &mut rng).len(), 4);
}

#[test]
fn scripts_are_checked_against_the_bounds() {
    let ac1 = DeploymentConfig::ac(1);
    let tamper = Behavior::Tamper { class: MessageClass::Reveal, mutation: Mutation::FlipFirst };
    let ok = AdversaryScript::honest().with(PartyId::unit(Lab::Alice, 0), tamper).with(PartyId::unit(Lab::Bob, 3), Behavior::Silent);
    assert!(ok.validate(&ac1).is_ok());
    let too_many = ok.clone().with(PartyId::unit(Lab::Alice, 1), Behavior::Leak);
    assert!(matches!(too_many.validate(&ac1), Err(SimError::ScriptViolation(_))));
    let two_pairs = AdversaryScript::honest()
        .with(PartyId::module(Lab::Alice, 0), Behavior::Leak)
        .with(PartyId::module(Lab::Bob, 1), Behavior::Leak);
    assert!(two_pairs.validate(&ac1).is_err());
    // Both modules of one pair count once.
    let one_pair = AdversaryScript::honest()
        .with(PartyId::module(Lab::Alice, 1), Behavior::Leak)
        .with(PartyId::module(Lab::Bob, 1), tamper);
    assert!(one_pair.validate(&ac1).is_ok());
    assert!(AdversaryScript::honest().with(PartyId::unit(Lab::Alice, 4), Behavior::Leak).validate(&ac1).is_err());
    assert!(AdversaryScript::honest().with(PartyId::relay(), Behavior::Leak).validate(&ac1).is_err());

    let pn = DeploymentConfig::pn();
    for b in [tamper, Behavior::FalseAbort, Behavior::Silent] {
        assert!(AdversaryScript::honest().with(PartyId::unit(Lab::Alice, 0), b).validate(&pn).is_err());
        assert!(AdversaryScript::honest().with(PartyId::module(Lab::Bob, 0), b).validate(&pn).is_err());
    }
    let leaks = AdversaryScript::honest()
        .with(PartyId::module(Lab::Alice, 0), Behavior::Leak)
        .with(PartyId::module(Lab::Bob, 1), Behavior::Leak)
        .with(PartyId::unit(Lab::Alice, 0), Behavior::Leak)
        .with(PartyId::unit(Lab::Alice, 1), Behavior::Leak);
    assert!(leaks.validate(&pn).is_ok());
    assert!(leaks.clone().collaborative(true).validate(&pn).is_err());

    let s = build_network(&pn, &NetworkOptions::default()).unwrap();
    assert!(inject(s.clone(), AdversaryScript::honest()).unwrap().sinks().ids().next().is_none());
    assert!(inject(s, too_many).is_err());
}

/// Shares `secret` from module `A.q0` in Alice's lab and reconstructs it.
fn share_and_reconstruct(session: &mut Session, secret: &BitString, rng: &mut ChaCha8Rng) -> Option<Vec<BitString>> {
    let cfg = session.vss().clone();
    let dealer = PartyId::module(Lab::Alice, 0);
    session.leak(dealer, "test", "secret", secret);
    let table = {
        let mut net = session.lab_net(Lab::Alice, "share", Some(dealer));
        share(&cfg, Endpoint::Dealer, secret, &mut net, rng).ok()?
    };
    let mut net = session.lab_net(Lab::Alice, "reconstruct", None);
    let rec = reconstruct(&cfg, &table, &mut net);
    Some(rec.outputs.into_values().map(|o| o.value).collect())
}

#[test]
fn pn_leaks_stay_in_disjoint_sinks() {
    let script = AdversaryScript::honest()
        .with(PartyId::module(Lab::Alice, 0), Behavior::Leak)
        .with(PartyId::module(Lab::Alice, 1), Behavior::Leak)
        .with(PartyId::unit(Lab::Alice, 1), Behavior::Leak);
    let mut s = inject(build_network(&DeploymentConfig::pn(), &NetworkOptions::default()).unwrap(), script).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let secret = BitString::random(16, &mut rng);
    share_and_reconstruct(&mut s, &secret, &mut rng).unwrap();
    let q1 = PartyId::module(Lab::Alice, 1);
    s.leak(q1, "test", "raw", &BitString::random(16, &mut rng));

    let ids: Vec<SinkId> = s.sinks().ids().collect();
    assert_eq!(ids.len(), 3);
    assert!(!ids.contains(&SinkId::Shared));
    for id in ids {
        let SinkId::Own(owner) = id else { unreachable!() };
        let sink = s.sinks().sink(id);
        assert!(!sink.is_empty(), "{owner} leaked nothing");
        assert!(sink.iter().all(|r| r.party == owner), "sink of {owner} holds foreign records");
    }
    // The unit's view is its own share plus what is revealed to it.
    let unit_sink = s.sinks().sink(SinkId::Own(PartyId::unit(Lab::Alice, 1)));
    assert!(unit_sink.iter().any(|r| r.label == "deal"));
}

#[test]
fn collaborative_leaks_share_one_sink() {
    let script = AdversaryScript::honest()
        .with(PartyId::unit(Lab::Alice, 0), Behavior::Leak)
        .with(PartyId::module(Lab::Alice, 0), Behavior::Leak)
        .collaborative(true);
    let mut s = inject(build_network(&DeploymentConfig::ac(1), &NetworkOptions::default()).unwrap(), script).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    share_and_reconstruct(&mut s, &BitString::random(8, &mut rng), &mut rng).unwrap();
    assert_eq!(s.sinks().ids().collect::<Vec<_>>(), vec![SinkId::Shared]);
    let parties: std::collections::BTreeSet<PartyId> = s.sinks().sink(SinkId::Shared).iter().map(|r| r.party).collect();
    assert_eq!(parties.len(), 2);
}

#[test]
fn tampered_reveals_are_outvoted() {
    let cfg = DeploymentConfig::ac(1);
    let base = build_network(&cfg, &NetworkOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..1000 {
        let unit = PartyId::unit(Lab::Alice, rng.random_range(0..cfg.n_c));
        let mutation = Mutation::ALL[rng.random_range(0..Mutation::ALL.len())];
        let script = AdversaryScript::honest().with(unit, Behavior::Tamper { class: MessageClass::Reveal, mutation });
        let mut s = inject(base.clone(), script).unwrap();
        let secret = BitString::random(rng.random_range(1..40), &mut rng);
        let outputs = share_and_reconstruct(&mut s, &secret, &mut rng).expect("honest dealer never aborts");
        assert_eq!(outputs.len(), cfg.n_c - 1, "trial {trial}");
        assert!(outputs.iter().all(|o| *o == secret), "trial {trial}: {unit} with {mutation:?}");
    }
}

/// Runs a fixed mix of sharing and lab-to-lab traffic.
fn exercise(cfg: &DeploymentConfig, script: AdversaryScript, seed: u64) -> Session {
    let options = NetworkOptions { seed, ..Default::default() };
    let mut s = inject(build_network(cfg, &options).unwrap(), script).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..3 {
        let secret = BitString::random(24, &mut rng);
        let _ = share_and_reconstruct(&mut s, &secret, &mut rng);
        for a in s.first_committee(Lab::Alice) {
            for b in s.first_committee(Lab::Bob) {
                s.send_lab_to_lab("sift", a, b, &secret).unwrap();
            }
        }
    }
    s
}

#[test]
fn identical_seeds_give_identical_transcripts() {
    let cfg = DeploymentConfig::ac(1);
    let script = AdversaryScript::honest()
        .with(PartyId::unit(Lab::Alice, 2), Behavior::Tamper { class: MessageClass::Any, mutation: Mutation::FlipRandom })
        .collaborative(true);
    let a = exercise(&cfg, script.clone(), 9);
    let b = exercise(&cfg, script.clone(), 9);
    assert!(!a.transcript().is_empty());
    assert_eq!(a.transcript().to_text(), b.transcript().to_text());
    assert_eq!(a.sinks(), b.sinks());
    assert_ne!(a.transcript().to_text(), exercise(&cfg, script, 10).transcript().to_text());
}

#[test]
fn passive_scripts_only_fill_sinks() {
    for (cfg, script) in [
        (
            DeploymentConfig::pn(),
            AdversaryScript::honest()
                .with(PartyId::unit(Lab::Alice, 0), Behavior::Leak)
                .with(PartyId::unit(Lab::Bob, 1), Behavior::Leak)
                .with(PartyId::module(Lab::Alice, 0), Behavior::Leak),
        ),
        (DeploymentConfig::ac(1), AdversaryScript::honest().with(PartyId::unit(Lab::Alice, 1), Behavior::Leak)),
    ] {
        let honest = exercise(&cfg, AdversaryScript::honest(), 21);
        let passive = exercise(&cfg, script, 21);
        assert_eq!(honest.transcript(), passive.transcript());
        assert!(honest.sinks().is_empty());
        assert!(!passive.sinks().is_empty());
    }
}

#[test]
fn transcript_lines_carry_payload_hex() {
    let s = exercise(&DeploymentConfig::honest(), AdversaryScript::honest(), 2);
    let text = s.transcript().to_text();
    let line = text.lines().find(|l| l.starts_with("sift l2l")).unwrap();
    let fields: Vec<&str> = line.split(' ').collect();
    assert_eq!(fields.len(), 6);
    assert_eq!((fields[2], fields[3], fields[4]), ("A.u0", "B.u0", "-"));
    assert!(BitString::from_hex(fields[5]).is_ok());
}

#[test]
fn lab_to_lab_authentication() {
    let cfg = DeploymentConfig::honest();
    let options = NetworkOptions { pool_bits: 400, ..Default::default() };
    let mut s = build_network(&cfg, &options).unwrap();
    let (a, b) = (PartyId::unit(Lab::Alice, 0), PartyId::unit(Lab::Bob, 0));
    let m = BitString::from_binary("110100111").unwrap();
    assert_eq!(s.send_lab_to_lab("p", a, b, &m).unwrap(), Delivery::Received(m.clone()));
    assert_eq!(s.send_lab_to_lab("p", b, a, &m).unwrap(), Delivery::Received(m.clone()));
    // Each tag costs its length in bits net: ceil(log2(2 * 9 / 1e-6)) = 25.
    assert_eq!(s.pool_remaining(0, 0), Some(400 - 2 * 25));

    s.forge_phase = Some("ir".into());
    assert_eq!(s.send_lab_to_lab("ir", a, b, &m).unwrap(), Delivery::Rejected);
    s.forge_phase = None;
    // A rejected tag still consumes the same bits on both sides.
    assert_eq!(s.send_lab_to_lab("p", a, b, &m).unwrap(), Delivery::Received(m.clone()));

    let mut exhausted = None;
    for _ in 0..20 {
        if let Err(e) = s.send_lab_to_lab("p", a, b, &m) {
            exhausted = Some(e);
            break;
        }
    }
    assert!(matches!(exhausted, Some(SimError::PoolExhausted { .. })));
}

#[test]
fn corrupted_senders_across_labs() {
    let cfg = DeploymentConfig::ac(1);
    let silent = PartyId::unit(Lab::Bob, 1);
    let liar = PartyId::unit(Lab::Bob, 2);
    let script = AdversaryScript::honest()
        .with(silent, Behavior::Silent)
        .with(PartyId::unit(Lab::Alice, 3), Behavior::Tamper { class: MessageClass::LabToLab, mutation: Mutation::FlipFirst });
    let mut s = inject(build_network(&cfg, &NetworkOptions::default()).unwrap(), script).unwrap();
    let m = BitString::from_binary("0000").unwrap();
    assert_eq!(s.send_lab_to_lab("x", silent, PartyId::unit(Lab::Alice, 0), &m).unwrap(), Delivery::Missing);
    assert_eq!(s.send_lab_to_lab("x", liar, PartyId::unit(Lab::Alice, 0), &m).unwrap(), Delivery::Received(m.clone()));
    // A corrupted unit holds its pool, so its lies carry valid tags.
    let lie = s.send_lab_to_lab("x", PartyId::unit(Lab::Alice, 3), liar, &m).unwrap();
    assert_eq!(lie, Delivery::Received(BitString::from_binary("1000").unwrap()));
}

#[test]
fn rbs_honest_outputs_are_common() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for model in CorruptionModel::ALL {
        for t in model.min_t().max(1)..=3 {
            let cfg = VssConfig::new(model, t).unwrap();
            let out = rbs_generate(37, &cfg, &mut HonestNet, &mut rng).unwrap();
            assert_eq!(out.outputs.len(), cfg.n);
            assert_eq!(out.common().unwrap().len(), 37);
            assert!(out.ties.is_empty());
        }
    }
}

fn chi_square_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn rbs_is_uniform_when_all_are_honest() {
    let cfg = VssConfig::new(AC, 1).unwrap();
    let mut counts = vec![0u64; 256];
    for seed in 0..100_000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = rbs_generate(8, &cfg, &mut HonestNet, &mut rng).unwrap();
        counts[out.common().unwrap().to_u64() as usize] += 1;
    }
    let p = chi_square_p(&counts);
    assert!(p > 0.01, "p = {p}");
}

/// Party `dealer` is actively corrupted and deals an all-zero string,
/// chosen without looking at anything.
struct FixedDealer {
    dealer: usize,
}

impl VssNet for FixedDealer {
    fn is_active(&self, party: usize) -> bool {
        party == self.dealer
    }

    fn send(&mut self, kind: VssMessage, from: Endpoint, _to: usize, _share: usize, payload: &BitString) -> Option<BitString> {
        if kind == VssMessage::Deal && from == Endpoint::Party(self.dealer) {
            Some(BitString::zeros(payload.len()))
        } else {
            Some(payload.clone())
        }
    }
}

#[test]
fn rbs_stays_uniform_with_one_adversarial_dealer() {
    let cfg = VssConfig::new(AC, 1).unwrap();
    let mut counts = vec![0u64; 256];
    for seed in 0..100_000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = rbs_generate(8, &cfg, &mut FixedDealer { dealer: 0 }, &mut rng).unwrap();
        assert_eq!(out.outputs.len(), 3);
        counts[out.common().expect("commonality").to_u64() as usize] += 1;
    }
    let p = chi_square_p(&counts);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn rbs_aborts_on_short_shares() {
    let cfg = DeploymentConfig::ac(1);
    let script = AdversaryScript::honest()
        .with(PartyId::unit(Lab::Bob, 0), Behavior::Tamper { class: MessageClass::Deal, mutation: Mutation::Truncate });
    let mut s = inject(build_network(&cfg, &NetworkOptions::default()).unwrap(), script).unwrap();
    let vss = s.vss().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut net = s.lab_net(Lab::Bob, "rbs", None);
    let err = rbs_generate(8, &vss, &mut net, &mut rng).unwrap_err();
    assert!(err.reason.contains("length"), "{}", err.reason);
    assert_ne!(err.origin, 0);
}

#[test]
fn rbs_in_a_session_is_common_under_fuzzing() {
    let cfg = DeploymentConfig::ac(2);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let classes = [MessageClass::Deal, MessageClass::Echo, MessageClass::Reveal, MessageClass::Any];
    let (mut done, mut aborted) = (0, 0);
    for _ in 0..300 {
        let mut script = AdversaryScript::honest().collaborative(true);
        let k = rng.random_range(0..=cfg.t_c);
        for l in rand::seq::index::sample(&mut rng, cfg.n_c, k) {
            let b = match rng.random_range(0..4) {
                0 => Behavior::Silent,
                1 => Behavior::FalseAbort,
                2 => Behavior::Leak,
                _ => Behavior::Tamper {
                    class: classes[rng.random_range(0..classes.len())],
                    mutation: Mutation::ALL[rng.random_range(0..Mutation::ALL.len())],
                },
            };
            script = script.with(PartyId::unit(Lab::Bob, l), b);
        }
        let options = NetworkOptions { seed: rng.random(), ..Default::default() };
        let mut s = inject(build_network(&cfg, &options).unwrap(), script).unwrap();
        let vss = s.vss().clone();
        let mut net = s.lab_net(Lab::Bob, "rbs", None);
        match rbs_generate(16, &vss, &mut net, &mut rng) {
            Ok(out) => {
                assert_eq!(out.common().expect("honest units agree").len(), 16);
                done += 1;
            }
            Err(_) => aborted += 1,
        }
    }
    assert!(done > 0 && aborted > 0, "done {done}, aborted {aborted}");
}

#[test]
fn rbs_passive_designated_unit() {
    let cfg = DeploymentConfig::new(PC, 0, PC, 3).unwrap();
    let script = AdversaryScript::honest().with(PartyId::unit(Lab::Alice, 0), Behavior::Leak).collaborative(true);
    let mut s = inject(build_network(&cfg, &NetworkOptions::default()).unwrap(), script).unwrap();
    let vss = s.vss().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut net = s.lab_net(Lab::Alice, "rbs", None);
    let out = rbs_generate(12, &vss, &mut net, &mut rng).unwrap();
    assert_eq!(out.outputs.len(), 4);
    assert!(out.common().is_some());
}
