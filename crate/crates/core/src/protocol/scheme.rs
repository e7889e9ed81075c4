//! QKD schemes as seen by post-processing: what the modules announce, how
//! the announcements are sifted and how a pair's entropy is bounded from
//! its observed counts.

use rand::RngCore;

use super::codec::{Reader, Writer, COUNT_BITS};
use super::ProtocolError;
use crate::bits::BitString;
use crate::channel::{
    bob_flips, sample_bb84_transmissions, sample_mdi_rounds, Basis, Bb84Observables, ChannelParams, MdiObservables,
    Setting,
};
use crate::decoy::{bb84_pe, mdi_pe, Bb84Budgets, DecoyError, MdiBudgets};
use crate::inputs::{ProtocolInputs, DECOYS};
use crate::keyrate::{Bb84, Mdi, QkdScheme};

/// What the two modules of one pair hand to their units: the key-basis raw
/// bits (shared) and the announcement `info` (sent in the clear inside the lab).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairRecords {
    pub raw_a: BitString,
    pub info_a: BitString,
    pub raw_b: BitString,
    pub info_b: BitString,
}

/// Test-basis counts of one pair.
#[derive(Clone, Debug, PartialEq)]
pub enum PeCounts {
    Mdi { x_sizes: [[f64; DECOYS]; DECOYS], x_errors: [[f64; DECOYS]; DECOYS] },
    /// `z_decoys[i]` is the intensity of the `i`-th key-basis candidate.
    Bb84 { z_decoys: Vec<usize>, x_sizes: [f64; DECOYS], x_errors: [f64; DECOYS] },
}

/// Key-basis candidates `Z_j` of one pair: positions into Alice's and Bob's
/// raw key-basis strings, in matching order.
#[derive(Clone, Debug, PartialEq)]
pub struct Sifting {
    pub z_a: Vec<usize>,
    pub z_b: Vec<usize>,
    pub counts: PeCounts,
}

pub trait ProtocolScheme: Send + Sync {
    fn name(&self) -> &'static str;

    /// The same scheme as seen by the key-length engine.
    fn key_scheme(&self) -> &dyn QkdScheme;

    /// Whether the pairs meet at an untrusted relay.
    fn uses_relay(&self) -> bool;

    /// Runs `inputs.n` rounds of one pair.
    fn generate(&self, params: &ChannelParams, inputs: &ProtocolInputs, rng: &mut dyn RngCore) -> PairRecords;

    /// Raw key-basis length announced by Alice's module, `None` if malformed.
    fn raw_len_a(&self, info_a: &BitString) -> Option<usize>;

    fn raw_len_b(&self, info_b: &BitString) -> Option<usize>;

    /// `None` if either announcement is malformed or they disagree on the
    /// round count.
    fn sift(&self, info_a: &BitString, info_b: &BitString) -> Option<Sifting>;

    /// Whether Bob inverts every sifted key bit.
    fn flips_key(&self) -> bool;

    /// Entropy bound of one pair given the candidates kept in `Z'`
    /// (`selected` indexes `Z_j`). Zero when nothing is certified.
    fn entropy_bound(&self, sifting: &Sifting, selected: &[usize], inputs: &ProtocolInputs, gamma_sec: f64) -> Result<f64, ProtocolError>;
}

fn certified(result: Result<Option<f64>, DecoyError>) -> Result<f64, ProtocolError> {
    match result {
        Ok(h) => Ok(h.unwrap_or(0.0)),
        Err(DecoyError::Stats(_)) => Ok(0.0),
        Err(e) => Err(ProtocolError::Inputs(e.to_string())),
    }
}

fn setting_code(s: Setting) -> u64 {
    match s {
        Setting::Z(_) => 0,
        Setting::X(k) => 1 + k as u64,
    }
}

fn decode_setting(code: u64, z_decoy: usize) -> Option<Setting> {
    match code {
        0 => Some(Setting::Z(z_decoy)),
        c if (c as usize) <= DECOYS => Some(Setting::X(c as usize - 1)),
        _ => None,
    }
}

/// Measurement-device-independent scheme: Charles announces successful
/// rounds, Alice her settings and X bits, Bob his settings and X bits.
#[derive(Clone, Copy, Debug, Default)]
pub struct MdiProtocol;

struct MdiInfoA {
    settings: Vec<Setting>,
    x_bits: BitString,
}

struct MdiInfoB {
    events: Vec<usize>,
    settings: Vec<Setting>,
    x_bits: BitString,
}

fn z_count(settings: &[Setting]) -> usize {
    settings.iter().filter(|s| s.basis() == Basis::Z).count()
}

fn decode_mdi_a(info: &BitString) -> Option<MdiInfoA> {
    let mut r = Reader::new(info);
    let n = r.count()?;
    if n.checked_mul(2)? > info.len() {
        return None;
    }
    let settings = (0..n).map(|_| decode_setting(r.uint(2)?, 0)).collect::<Option<Vec<_>>>()?;
    let x_bits = r.raw(n - z_count(&settings))?;
    r.is_done().then_some(MdiInfoA { settings, x_bits })
}

fn decode_mdi_b(info: &BitString) -> Option<MdiInfoB> {
    let mut r = Reader::new(info);
    let n = r.count()?;
    if n.checked_mul(4)? > info.len() {
        return None;
    }
    let mut events = Vec::with_capacity(n);
    let mut settings = Vec::with_capacity(n);
    for _ in 0..n {
        events.push(r.uint(2)? as usize);
        settings.push(decode_setting(r.uint(2)?, 0)?);
    }
    let x_bits = r.raw(n - z_count(&settings))?;
    r.is_done().then_some(MdiInfoB { events, settings, x_bits })
}

impl ProtocolScheme for MdiProtocol {
    fn name(&self) -> &'static str {
        "mdi"
    }

    fn key_scheme(&self) -> &dyn QkdScheme {
        &Mdi
    }

    fn uses_relay(&self) -> bool {
        true
    }

    fn generate(&self, params: &ChannelParams, inputs: &ProtocolInputs, rng: &mut dyn RngCore) -> PairRecords {
        let rounds = sample_mdi_rounds(params, inputs, inputs.n, rng);
        let (mut wa, mut wb) = (Writer::new(), Writer::new());
        wa.uint(rounds.len() as u64, COUNT_BITS);
        wb.uint(rounds.len() as u64, COUNT_BITS);
        let (mut raw_a, mut raw_b, mut xa, mut xb) = (BitString::new(), BitString::new(), BitString::new(), BitString::new());
        for r in &rounds {
            wa.uint(setting_code(r.alice), 2);
            wb.uint(r.event as u64, 2).uint(setting_code(r.bob), 2);
            // Bob records his detector-free bit; the flip is applied later.
            let flip = r.alice.basis() == r.bob.basis() && bob_flips(r.bob.basis(), r.event);
            let bob_raw = r.bob_bit ^ flip;
            match r.alice.basis() {
                Basis::Z => raw_a.push(r.alice_bit),
                Basis::X => xa.push(r.alice_bit),
            }
            match r.bob.basis() {
                Basis::Z => raw_b.push(bob_raw),
                Basis::X => xb.push(bob_raw),
            }
        }
        PairRecords { raw_a, info_a: wa.raw(&xa).finish(), raw_b, info_b: wb.raw(&xb).finish() }
    }

    fn raw_len_a(&self, info_a: &BitString) -> Option<usize> {
        decode_mdi_a(info_a).map(|d| z_count(&d.settings))
    }

    fn raw_len_b(&self, info_b: &BitString) -> Option<usize> {
        decode_mdi_b(info_b).map(|d| z_count(&d.settings))
    }

    fn sift(&self, info_a: &BitString, info_b: &BitString) -> Option<Sifting> {
        let (a, b) = (decode_mdi_a(info_a)?, decode_mdi_b(info_b)?);
        if a.settings.len() != b.settings.len() {
            return None;
        }
        let (mut za, mut zb, mut xa, mut xb) = (0, 0, 0, 0);
        let mut sifting = Sifting {
            z_a: Vec::new(),
            z_b: Vec::new(),
            counts: PeCounts::Mdi { x_sizes: [[0.0; DECOYS]; DECOYS], x_errors: [[0.0; DECOYS]; DECOYS] },
        };
        let PeCounts::Mdi { x_sizes, x_errors } = &mut sifting.counts else { unreachable!() };
        for ((sa, sb), &event) in a.settings.iter().zip(&b.settings).zip(&b.events) {
            match (*sa, *sb) {
                (Setting::Z(_), Setting::Z(_)) => {
                    sifting.z_a.push(za);
                    sifting.z_b.push(zb);
                }
                (Setting::X(i), Setting::X(j)) => {
                    x_sizes[i][j] += 1.0;
                    let bob = b.x_bits.get(xb) ^ bob_flips(Basis::X, event);
                    if a.x_bits.get(xa) != bob {
                        x_errors[i][j] += 1.0;
                    }
                }
                _ => {}
            }
            match sa.basis() {
                Basis::Z => za += 1,
                Basis::X => xa += 1,
            }
            match sb.basis() {
                Basis::Z => zb += 1,
                Basis::X => xb += 1,
            }
        }
        Some(sifting)
    }

    fn flips_key(&self) -> bool {
        bob_flips(Basis::Z, 0)
    }

    fn entropy_bound(&self, sifting: &Sifting, _selected: &[usize], inputs: &ProtocolInputs, gamma_sec: f64) -> Result<f64, ProtocolError> {
        let PeCounts::Mdi { x_sizes, x_errors } = &sifting.counts else {
            return Err(ProtocolError::Inputs("MDI estimation needs MDI counts".into()));
        };
        let obs = MdiObservables { z_size: sifting.z_a.len() as f64, x_sizes: *x_sizes, x_errors: *x_errors };
        certified(mdi_pe(&obs, inputs, &MdiBudgets::common(gamma_sec)).map(|r| r.entropy_bound()))
    }
}

/// Decoy-state BB84: Alice announces every round's basis and intensity plus
/// her X bits, Bob which rounds clicked, his bases and his X bits.
#[derive(Clone, Copy, Debug, Default)]
pub struct Bb84Protocol;

struct Bb84InfoA {
    settings: Vec<Setting>,
    x_bits: BitString,
}

struct Bb84InfoB {
    clicks: Vec<bool>,
    /// Basis per clicked round.
    bases: Vec<Basis>,
    x_bits: BitString,
}

fn decode_bb84_a(info: &BitString) -> Option<Bb84InfoA> {
    let mut r = Reader::new(info);
    let n = r.count()?;
    if n.checked_mul(3)? > info.len() {
        return None;
    }
    let mut settings = Vec::with_capacity(n);
    for _ in 0..n {
        let z = !r.bit()?;
        let k = r.uint(2)? as usize;
        if k >= DECOYS {
            return None;
        }
        settings.push(if z { Setting::Z(k) } else { Setting::X(k) });
    }
    let x_bits = r.raw(n - z_count(&settings))?;
    r.is_done().then_some(Bb84InfoA { settings, x_bits })
}

fn decode_bb84_b(info: &BitString) -> Option<Bb84InfoB> {
    let mut r = Reader::new(info);
    let n = r.count()?;
    let clicks = (0..n).map(|_| r.bit()).collect::<Option<Vec<_>>>()?;
    let clicked = clicks.iter().filter(|&&c| c).count();
    let bases = (0..clicked).map(|_| Some(if r.bit()? { Basis::X } else { Basis::Z })).collect::<Option<Vec<_>>>()?;
    let x_bits = r.raw(bases.iter().filter(|&&b| b == Basis::X).count())?;
    r.is_done().then_some(Bb84InfoB { clicks, bases, x_bits })
}

impl ProtocolScheme for Bb84Protocol {
    fn name(&self) -> &'static str {
        "bb84"
    }

    fn key_scheme(&self) -> &dyn QkdScheme {
        &Bb84
    }

    fn uses_relay(&self) -> bool {
        false
    }

    fn generate(&self, params: &ChannelParams, inputs: &ProtocolInputs, rng: &mut dyn RngCore) -> PairRecords {
        let rounds = sample_bb84_transmissions(params, inputs, inputs.n, rng);
        let (mut wa, mut wb) = (Writer::new(), Writer::new());
        wa.uint(rounds.len() as u64, COUNT_BITS);
        wb.uint(rounds.len() as u64, COUNT_BITS);
        let (mut raw_a, mut raw_b, mut xa, mut xb) = (BitString::new(), BitString::new(), BitString::new(), BitString::new());
        let mut bases = BitString::new();
        for t in &rounds {
            wa.bit(t.alice.basis() == Basis::X).uint(t.alice.intensity_index() as u64, 2);
            match t.alice.basis() {
                Basis::Z => raw_a.push(t.alice_bit),
                Basis::X => xa.push(t.alice_bit),
            }
            wb.bit(t.bob_bit.is_some());
            if let Some(bit) = t.bob_bit {
                bases.push(t.bob_basis == Basis::X);
                match t.bob_basis {
                    Basis::Z => raw_b.push(bit),
                    Basis::X => xb.push(bit),
                }
            }
        }
        PairRecords { raw_a, info_a: wa.raw(&xa).finish(), raw_b, info_b: wb.raw(&bases).raw(&xb).finish() }
    }

    fn raw_len_a(&self, info_a: &BitString) -> Option<usize> {
        decode_bb84_a(info_a).map(|d| z_count(&d.settings))
    }

    fn raw_len_b(&self, info_b: &BitString) -> Option<usize> {
        decode_bb84_b(info_b).map(|d| d.bases.iter().filter(|&&b| b == Basis::Z).count())
    }

    fn sift(&self, info_a: &BitString, info_b: &BitString) -> Option<Sifting> {
        let (a, b) = (decode_bb84_a(info_a)?, decode_bb84_b(info_b)?);
        if a.settings.len() != b.clicks.len() {
            return None;
        }
        let mut z_decoys = Vec::new();
        let (mut x_sizes, mut x_errors) = ([0.0; DECOYS], [0.0; DECOYS]);
        let (mut z_a, mut z_b) = (Vec::new(), Vec::new());
        let (mut za, mut zb, mut xa, mut xb, mut clicked) = (0, 0, 0, 0, 0);
        for (sa, &click) in a.settings.iter().zip(&b.clicks) {
            let bob = click.then(|| b.bases[clicked]);
            match (*sa, bob) {
                (Setting::Z(k), Some(Basis::Z)) => {
                    z_a.push(za);
                    z_b.push(zb);
                    z_decoys.push(k);
                }
                (Setting::X(k), Some(Basis::X)) => {
                    x_sizes[k] += 1.0;
                    if a.x_bits.get(xa) != b.x_bits.get(xb) {
                        x_errors[k] += 1.0;
                    }
                }
                _ => {}
            }
            match sa.basis() {
                Basis::Z => za += 1,
                Basis::X => xa += 1,
            }
            match bob {
                Some(Basis::Z) => zb += 1,
                Some(Basis::X) => xb += 1,
                None => {}
            }
            clicked += click as usize;
        }
        Some(Sifting { z_a, z_b, counts: PeCounts::Bb84 { z_decoys, x_sizes, x_errors } })
    }

    fn flips_key(&self) -> bool {
        false
    }

    fn entropy_bound(&self, sifting: &Sifting, selected: &[usize], inputs: &ProtocolInputs, gamma_sec: f64) -> Result<f64, ProtocolError> {
        let PeCounts::Bb84 { z_decoys, x_sizes, x_errors } = &sifting.counts else {
            return Err(ProtocolError::Inputs("BB84 estimation needs BB84 counts".into()));
        };
        let mut z_prime = [0.0; DECOYS];
        for &i in selected {
            z_prime[z_decoys[i]] += 1.0;
        }
        let obs = Bb84Observables { z_prime, x_sizes: *x_sizes, x_errors: *x_errors };
        certified(bb84_pe(&obs, inputs, &Bb84Budgets::common(gamma_sec)).map(|r| r.entropy_bound()))
    }
}

pub const PROTOCOL_SCHEME_NAMES: [&str; 2] = ["mdi", "bb84"];

pub fn protocol_scheme_by_name(name: &str) -> Result<Box<dyn ProtocolScheme>, ProtocolError> {
    match name.to_ascii_lowercase().as_str() {
        "mdi" => Ok(Box::new(MdiProtocol)),
        "bb84" => Ok(Box::new(Bb84Protocol)),
        _ => Err(ProtocolError::Unknown { kind: "scheme", name: name.to_string() }),
    }
}
