//! Expected and sampled observables of the MDI and BB84 setups.

mod bb84;
mod bessel;
mod fock;
mod mdi;
mod rounds;
mod tagged;

pub use bb84::{bb84_expected_observables, bb84_gain_and_error, bb84_sample_observables, Bb84Gains, Bb84Model, Bb84Observables};
pub use bessel::i0_sym;
pub use fock::{bb84_fock_clicks, mdi_fock_outcomes, poisson_cutoff, FockClicks};
pub use mdi::{
    bob_flips, mdi_expected_observables, mdi_gain_and_error, mdi_sample_observables, Basis, MdiGains, MdiMessageSizes, MdiModel,
    MdiObservables, DETECTOR_ARM, DETECTOR_POL, SUCCESS_EVENTS,
};
pub use rounds::{sample_bb84_rounds, sample_bb84_transmissions, sample_mdi_rounds, Bb84Round, Bb84Transmission, MdiRound, Setting};
pub use tagged::{bb84_tagged_run, mdi_tagged_run, Bb84Truth, MdiTruth};

/// Physical parameters of the link and detectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParams {
    pub eta_det: f64,
    /// Dark-count probability per detector and round.
    pub p_d: f64,
    /// Polarization misalignment (radians) of Alice's and Bob's arms.
    pub delta_a: f64,
    pub delta_b: f64,
    /// Fiber attenuation in dB/km, used only to express loss as distance.
    pub alpha_att: f64,
    /// Total Alice-to-Bob loss in dB.
    pub loss_db: f64,
}

impl ChannelParams {
    /// Detector and misalignment values of the reference experiment, with
    /// the same misalignment in both MDI arms.
    pub fn reference_defaults(loss_db: f64) -> Self {
        Self { eta_det: 0.65, p_d: 7.2e-8, delta_a: 0.08, delta_b: 0.08, alpha_att: 0.2, loss_db }
    }

    pub fn with_loss(&self, loss_db: f64) -> Self {
        Self { loss_db, ..self.clone() }
    }

    pub fn distance_km(&self) -> f64 {
        self.loss_db / self.alpha_att
    }

    /// Channel transmittance times detector efficiency over `loss_db` dB.
    pub fn efficiency(&self, loss_db: f64) -> f64 {
        10f64.powf(-loss_db / 10.0) * self.eta_det
    }
}

/// Poisson photon-number probability `e^{-a} a^n / n!`.
pub fn poisson(a: f64, n: usize) -> f64 {
    if a == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln = -a + n as f64 * a.ln() - (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    ln.exp()
}
